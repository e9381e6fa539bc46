//! Integration of the coupled Morris-Lecar equations and classification of the
//! long-run regime (steady state, asymmetric or equal amplitude oscillation).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{MLParams, NetworkState};
use crate::trace::{GateChannels, TraceMeta, VoltageTrace};

/// Voltages beyond this magnitude (mV) are treated as numerical blow-up.
pub const DEFAULT_GUARD_MV: f64 = 500.0;

/// Steady-state gating values and the recovery rate at a single voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gating {
    pub m_inf: f64,
    pub w_inf: f64,
    pub lambda: f64,
    pub s_inf: f64,
}

pub fn gating_functions(v: f64, p: &MLParams) -> Gating {
    let m_inf = 0.5 * (1.0 + ((v - p.v11) / p.v22).tanh());
    let w_inf = 0.5 * (1.0 + ((v - p.v3) / p.v4).tanh());
    let lambda = p.phi * ((v - p.v3) / (2.0 * p.v4)).cosh();
    let s_inf = 1.0 / (1.0 + (-(v - p.vt) / p.vs).exp());
    Gating {
        m_inf,
        w_inf,
        lambda,
        s_inf,
    }
}

/// Deterministic right-hand side. Synapse `s1` is driven by `v2` and `s2` by `v1`.
pub fn ml_derivatives(x: &NetworkState, p: &MLParams) -> NetworkState {
    let g1 = gating_functions(x.v1, p);
    let g2 = gating_functions(x.v2, p);
    let (leak_gate1, leak_gate2) = if p.paper_literal_leak {
        (x.w1, x.w1)
    } else {
        (1.0, 1.0)
    };
    let current = |v: f64, w: f64, s: f64, g: &Gating, leak_gate: f64| {
        (-p.g_ca * g.m_inf * (v - p.v_ca) - p.g_k * w * (v - p.v_k) - p.g_l * leak_gate * (v - p.v_l)
            + p.iapp
            - p.gsyn * s * (v - p.v_syn))
            / p.c
    };
    NetworkState {
        v1: current(x.v1, x.w1, x.s1, &g1, leak_gate1),
        v2: current(x.v2, x.w2, x.s2, &g2, leak_gate2),
        w1: g1.lambda * (g1.w_inf - x.w1),
        w2: g2.lambda * (g2.w_inf - x.w2),
        s1: (g2.s_inf - x.s1) / p.tau,
        s2: (g1.s_inf - x.s2) / p.tau,
    }
}

/// Step size, horizon and recording stride for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    pub guard_mv: f64,
    pub record_gates: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_end: 1000.0,
            dt: 0.05,
            record_every: 1,
            guard_mv: DEFAULT_GUARD_MV,
            record_gates: false,
        }
    }
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.dt.is_finite() && self.t_end.is_finite()) {
            return Err(Error::InvalidParams("dt and t_end must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParams("record_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Times at which a run with this configuration records a sample.
    pub fn record_times(&self) -> Vec<f64> {
        (0..=self.steps())
            .step_by(self.record_every)
            .map(|i| i as f64 * self.dt)
            .collect()
    }
}

struct Recorder {
    times: Vec<f64>,
    v1: Vec<f64>,
    v2: Vec<f64>,
    gates: Option<GateChannels>,
}

impl Recorder {
    fn new(cfg: &SimConfig) -> Self {
        let cap = cfg.steps() / cfg.record_every + 1;
        Self {
            times: Vec::with_capacity(cap),
            v1: Vec::with_capacity(cap),
            v2: Vec::with_capacity(cap),
            gates: cfg.record_gates.then(GateChannels::default),
        }
    }

    fn push(&mut self, t: f64, x: &NetworkState) {
        self.times.push(t);
        self.v1.push(x.v1);
        self.v2.push(x.v2);
        if let Some(g) = &mut self.gates {
            g.w1.push(x.w1);
            g.w2.push(x.w2);
            g.s1.push(x.s1);
            g.s2.push(x.s2);
        }
    }

    fn finish(self, meta: TraceMeta) -> VoltageTrace {
        VoltageTrace {
            times: self.times,
            v1: self.v1,
            v2: self.v2,
            gates: self.gates,
            meta: Some(meta),
        }
    }
}

fn check_guard(t: f64, x: &NetworkState, guard: f64) -> Result<()> {
    for (component, value) in x.to_array().into_iter().enumerate() {
        let bad = !value.is_finite() || (component < 2 && value.abs() > guard);
        if bad {
            return Err(Error::NonFinite {
                t,
                component,
                value,
            });
        }
    }
    Ok(())
}

fn axpy(x: &NetworkState, h: f64, k: &NetworkState) -> NetworkState {
    let (a, b) = (x.to_array(), k.to_array());
    NetworkState::from_array(std::array::from_fn(|i| a[i] + h * b[i]))
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step(x: &NetworkState, p: &MLParams, dt: f64) -> NetworkState {
    let k1 = ml_derivatives(x, p);
    let k2 = ml_derivatives(&axpy(x, 0.5 * dt, &k1), p);
    let k3 = ml_derivatives(&axpy(x, 0.5 * dt, &k2), p);
    let k4 = ml_derivatives(&axpy(x, dt, &k3), p);
    let (x, k1, k2, k3, k4) = (
        x.to_array(),
        k1.to_array(),
        k2.to_array(),
        k3.to_array(),
        k4.to_array(),
    );
    NetworkState::from_array(std::array::from_fn(|i| {
        x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Fixed-step RK4 integration of the noise-free system.
pub fn simulate_deterministic(
    params: &MLParams,
    ic: NetworkState,
    cfg: &SimConfig,
) -> Result<VoltageTrace> {
    params.validate()?;
    cfg.validate()?;
    if params.delta != 0.0 {
        return Err(Error::InvalidParams(
            "deterministic integration requires delta = 0".into(),
        ));
    }
    let mut rec = Recorder::new(cfg);
    let mut x = ic;
    check_guard(0.0, &x, cfg.guard_mv)?;
    rec.push(0.0, &x);
    for step in 1..=cfg.steps() {
        x = rk4_step(&x, params, cfg.dt);
        let t = step as f64 * cfg.dt;
        check_guard(t, &x, cfg.guard_mv)?;
        if step % cfg.record_every == 0 {
            rec.push(t, &x);
        }
    }
    Ok(rec.finish(TraceMeta {
        params: *params,
        seed: None,
    }))
}

/// Euler-Maruyama integration with independent additive voltage noise
/// `delta·√dt·N(0,1)` on each neuron. With `delta = 0` this is forward Euler.
pub fn simulate_stochastic(
    params: &MLParams,
    ic: NetworkState,
    cfg: &SimConfig,
    seed: u64,
) -> Result<VoltageTrace> {
    params.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_scale = params.delta * cfg.dt.sqrt();
    let mut rec = Recorder::new(cfg);
    let mut x = ic;
    check_guard(0.0, &x, cfg.guard_mv)?;
    rec.push(0.0, &x);
    for step in 1..=cfg.steps() {
        let mut next = axpy(&x, cfg.dt, &ml_derivatives(&x, params));
        if noise_scale > 0.0 {
            let n1: f64 = StandardNormal.sample(&mut rng);
            let n2: f64 = StandardNormal.sample(&mut rng);
            next.v1 += noise_scale * n1;
            next.v2 += noise_scale * n2;
        }
        x = next;
        let t = step as f64 * cfg.dt;
        check_guard(t, &x, cfg.guard_mv)?;
        if step % cfg.record_every == 0 {
            rec.push(t, &x);
        }
    }
    Ok(rec.finish(TraceMeta {
        params: *params,
        seed: Some(seed),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynamicsKind {
    #[serde(rename = "SS")]
    SteadyState,
    #[serde(rename = "AAS")]
    AsymmetricAmplitude,
    #[serde(rename = "EAS")]
    EqualAmplitude,
}

impl std::fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SteadyState => "SS",
            Self::AsymmetricAmplitude => "AAS",
            Self::EqualAmplitude => "EAS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRelation {
    InPhase,
    AntiPhase,
    NotApplicable,
}

impl std::fmt::Display for PhaseRelation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::InPhase => "in-phase",
            Self::AntiPhase => "anti-phase",
            Self::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsLabel {
    pub kind: DynamicsKind,
    /// Peak-to-peak voltage (mV) of each neuron over the analysis window.
    pub amplitudes: [f64; 2],
    pub phase_relation: PhaseRelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub transient_fraction: f64,
    /// Both peak-to-peak amplitudes below this (mV) means steady state.
    pub ss_threshold: f64,
    /// Larger/smaller amplitude ratio above this means AAS.
    pub aas_ratio: f64,
    /// Minimum number of oscillation periods in the analysis window.
    pub min_periods: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            transient_fraction: 0.3,
            ss_threshold: 5.0,
            aas_ratio: 2.0,
            min_periods: 10,
        }
    }
}

fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Upward crossings of the midpoint between min and max.
fn midpoint_crossings(x: &[f64]) -> usize {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mid = 0.5 * (lo + hi);
    x.windows(2).filter(|w| w[0] < mid && w[1] >= mid).count()
}

pub fn classify_dynamics(trace: &VoltageTrace, cfg: &ClassifierConfig) -> Result<DynamicsLabel> {
    if !(0.0..1.0).contains(&cfg.transient_fraction) {
        return Err(Error::InvalidParams("transient_fraction must lie in [0, 1)".into()));
    }
    let n = trace.len();
    let start = (cfg.transient_fraction * n as f64).floor() as usize;
    if n.saturating_sub(start) < 3 {
        return Err(Error::TooShort(format!(
            "{} samples after discarding the transient",
            n.saturating_sub(start)
        )));
    }
    let v1 = &trace.v1[start..];
    let v2 = &trace.v2[start..];
    let amplitudes = [peak_to_peak(v1), peak_to_peak(v2)];
    if amplitudes.iter().all(|&a| a < cfg.ss_threshold) {
        return Ok(DynamicsLabel {
            kind: DynamicsKind::SteadyState,
            amplitudes,
            phase_relation: PhaseRelation::NotApplicable,
        });
    }
    let dominant = if amplitudes[0] >= amplitudes[1] { v1 } else { v2 };
    let periods = midpoint_crossings(dominant);
    if periods < cfg.min_periods {
        return Err(Error::TooShort(format!(
            "{periods} oscillation periods in the analysis window, need {}",
            cfg.min_periods
        )));
    }
    let (hi, lo) = if amplitudes[0] >= amplitudes[1] {
        (amplitudes[0], amplitudes[1])
    } else {
        (amplitudes[1], amplitudes[0])
    };
    let kind = if lo <= 0.0 || hi / lo > cfg.aas_ratio {
        DynamicsKind::AsymmetricAmplitude
    } else {
        DynamicsKind::EqualAmplitude
    };
    let (m1, m2) = (mean(v1), mean(v2));
    let xcorr: f64 = v1.iter().zip(v2).map(|(a, b)| (a - m1) * (b - m2)).sum();
    let phase_relation = if xcorr > 0.0 {
        PhaseRelation::InPhase
    } else {
        PhaseRelation::AntiPhase
    };
    Ok(DynamicsLabel {
        kind,
        amplitudes,
        phase_relation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gating_midpoints() {
        let p = MLParams::default();
        assert_eq!(gating_functions(p.v11, &p).m_inf, 0.5);
        let g = gating_functions(p.v3, &p);
        assert_eq!(g.w_inf, 0.5);
        assert_eq!(g.lambda, p.phi);
        assert_eq!(gating_functions(p.vt, &p).s_inf, 0.5);
    }

    #[test]
    fn gating_bounded_and_monotone_on_grid() {
        let p = MLParams::default();
        let grid: Vec<f64> = (0..=20_000).map(|i| -500.0 + 0.05 * i as f64).collect();
        let gs: Vec<Gating> = grid.iter().map(|&v| gating_functions(v, &p)).collect();
        for g in &gs {
            // Closed interval: tanh saturates to ±1 in f64 far from the midpoint.
            for x in [g.m_inf, g.w_inf, g.s_inf] {
                assert!((0.0..=1.0).contains(&x));
            }
            assert!(g.lambda > 0.0);
        }
        for w in gs.windows(2) {
            assert!(w[1].m_inf >= w[0].m_inf);
            assert!(w[1].w_inf >= w[0].w_inf);
            assert!(w[1].s_inf >= w[0].s_inf);
        }
        // Strictly inside (0, 1) over the physiological range.
        for v in (-150..=150).map(f64::from) {
            let g = gating_functions(v, &p);
            for x in [g.m_inf, g.w_inf, g.s_inf] {
                assert!(x > 0.0 && x < 1.0, "v = {v}: {x}");
            }
        }
    }

    #[test]
    fn gating_fixed_point_has_zero_rate() {
        let p = MLParams::default();
        let v = -13.7;
        let g = gating_functions(v, &p);
        let x = NetworkState {
            v1: v,
            v2: 4.0,
            w1: g.w_inf,
            w2: gating_functions(4.0, &p).w_inf,
            s1: 0.3,
            s2: 0.1,
        };
        let d = ml_derivatives(&x, &p);
        assert_eq!(d.w1, 0.0);
        assert_eq!(d.w2, 0.0);
    }

    #[test]
    fn symmetric_state_gives_symmetric_derivatives() {
        let p = MLParams::with_drive(97.5, 0.2);
        let x = NetworkState::from_array([-12.0, -12.0, 0.2, 0.2, 0.4, 0.4]);
        let d = ml_derivatives(&x, &p);
        assert_eq!(d.v1, d.v2);
        assert_eq!(d.w1, d.w2);
        assert_eq!(d.s1, d.s2);
    }

    #[test]
    fn literal_leak_uses_w1_in_both_equations() {
        let p = MLParams {
            paper_literal_leak: true,
            ..MLParams::default()
        };
        let std = MLParams::default();
        let x = NetworkState::default();
        let d = ml_derivatives(&x, &p);
        let d0 = ml_derivatives(&x, &std);
        // Leak contribution difference: gL·(1 − w1)·(v − vL)/C for both neurons.
        let expect1 = p.g_l * (1.0 - x.w1) * (x.v1 - p.v_l) / p.c;
        let expect2 = p.g_l * (1.0 - x.w1) * (x.v2 - p.v_l) / p.c;
        assert!((d.v1 - d0.v1 - expect1).abs() < 1e-12);
        assert!((d.v2 - d0.v2 - expect2).abs() < 1e-12);
        assert_eq!(d.w1, d0.w1);
    }

    #[test]
    fn deterministic_rejects_noise_and_bad_steps() {
        let ic = NetworkState::default();
        let noisy = MLParams {
            delta: 0.1,
            ..Default::default()
        };
        assert!(simulate_deterministic(&noisy, ic, &SimConfig::default()).is_err());
        let bad = SimConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(simulate_deterministic(&MLParams::default(), ic, &bad).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        // A huge applied current drives v past the guard.
        let p = MLParams {
            iapp: 1e7,
            ..Default::default()
        };
        let cfg = SimConfig {
            t_end: 10.0,
            ..Default::default()
        };
        match simulate_deterministic(&p, NetworkState::default(), &cfg) {
            Err(Error::NonFinite { component, .. }) => assert!(component < 2),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn record_stride() {
        let cfg = SimConfig {
            t_end: 10.0,
            dt: 0.05,
            record_every: 20,
            ..Default::default()
        };
        let tr = simulate_deterministic(&MLParams::default(), NetworkState::default(), &cfg).unwrap();
        assert_eq!(tr.len(), 11);
        assert_eq!(tr.times, cfg.record_times());
        assert!((tr.times[10] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn constant_trace_is_steady_state() {
        let n = 1000;
        let tr = VoltageTrace::new(
            (0..n).map(|i| i as f64).collect(),
            vec![-20.0; n],
            vec![-20.0; n],
        )
        .unwrap();
        let l = classify_dynamics(&tr, &ClassifierConfig::default()).unwrap();
        assert_eq!(l.kind, DynamicsKind::SteadyState);
        assert_eq!(l.phase_relation, PhaseRelation::NotApplicable);
    }

    #[test]
    fn classifier_reports_too_short() {
        let tr = VoltageTrace::new(vec![0.0, 1.0], vec![0.0, 50.0], vec![0.0, 50.0]).unwrap();
        assert!(matches!(
            classify_dynamics(&tr, &ClassifierConfig::default()),
            Err(Error::TooShort(_))
        ));
        // Large swings but only two periods.
        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = t.iter().map(|x| 40.0 * (x * 0.6).sin()).collect();
        let tr = VoltageTrace::new(t, v.clone(), v).unwrap();
        assert!(matches!(
            classify_dynamics(&tr, &ClassifierConfig::default()),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn classifier_synthetic_regimes() {
        let t: Vec<f64> = (0..20_000).map(|i| i as f64 * 0.05).collect();
        let big: Vec<f64> = t.iter().map(|x| 40.0 * (x * 0.1).sin()).collect();
        let small_anti: Vec<f64> = t.iter().map(|x| -5.0 * (x * 0.1).sin()).collect();
        let tr = VoltageTrace::new(t.clone(), small_anti, big.clone()).unwrap();
        let l = classify_dynamics(&tr, &ClassifierConfig::default()).unwrap();
        assert_eq!(l.kind, DynamicsKind::AsymmetricAmplitude);
        assert_eq!(l.phase_relation, PhaseRelation::AntiPhase);

        let near: Vec<f64> = t.iter().map(|x| 38.0 * (x * 0.1 + 0.2).sin()).collect();
        let tr = VoltageTrace::new(t, near, big).unwrap();
        let l = classify_dynamics(&tr, &ClassifierConfig::default()).unwrap();
        assert_eq!(l.kind, DynamicsKind::EqualAmplitude);
        assert_eq!(l.phase_relation, PhaseRelation::InPhase);
    }
}
