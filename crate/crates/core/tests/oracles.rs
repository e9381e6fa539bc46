//! Checks against independent reference computations.

use std::f64::consts::PI;

use mlcouple::features::{
    cumulative_power, fourier_power_slope, mean_log_likelihood, model_power, ols_line,
    p0_estimate, power_log_likelihood, DataFeatures, FourierTerm, LikelihoodConfig, PowerCurve,
    SpanChoice, Theta,
};
use mlcouple::mcmc::{Posterior, LogTarget};
use mlcouple::sim::{
    ml_derivatives, simulate_deterministic, simulate_stochastic, SimConfig,
};
use mlcouple::smooth::{gcv_score, gcv_select, lwpr_eval, smooth_trace, LocalPolySmoother, LwprConfig};
use mlcouple::{FeasibleRegion, MLParams, NetworkState};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// The coupled equations written out term by term.
fn reference_rhs(x: [f64; 6], p: &MLParams, literal: bool) -> [f64; 6] {
    let [v1, v2, w1, w2, s1, s2] = x;
    let minf = |v: f64| 0.5 * (1.0 + ((v - p.v11) / p.v22).tanh());
    let winf = |v: f64| 0.5 * (1.0 + ((v - p.v3) / p.v4).tanh());
    let lam = |v: f64| p.phi * ((v - p.v3) / (2.0 * p.v4)).cosh();
    let sinf = |v: f64| 1.0 / (1.0 + (-(v - p.vt) / p.vs).exp());
    let leak = |v: f64| {
        if literal {
            p.g_l * w1 * (v - p.v_l)
        } else {
            p.g_l * (v - p.v_l)
        }
    };
    let dv1 = (p.iapp
        - p.g_ca * minf(v1) * (v1 - p.v_ca)
        - p.g_k * w1 * (v1 - p.v_k)
        - leak(v1)
        - p.gsyn * s1 * (v1 - p.v_syn))
        / p.c;
    let dv2 = (p.iapp
        - p.g_ca * minf(v2) * (v2 - p.v_ca)
        - p.g_k * w2 * (v2 - p.v_k)
        - leak(v2)
        - p.gsyn * s2 * (v2 - p.v_syn))
        / p.c;
    [
        dv1,
        dv2,
        lam(v1) * (winf(v1) - w1),
        lam(v2) * (winf(v2) - w2),
        (sinf(v2) - s1) / p.tau,
        (sinf(v1) - s2) / p.tau,
    ]
}

#[test]
fn derivatives_match_reference_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for literal in [false, true] {
        let mut states = vec![NetworkState::default().to_array()];
        for _ in 0..50 {
            states.push([
                rng.random_range(-80.0..60.0),
                rng.random_range(-80.0..60.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ]);
        }
        let p = MLParams {
            paper_literal_leak: literal,
            ..MLParams::with_drive(95.5, 0.15)
        };
        for x in states {
            let got = ml_derivatives(&NetworkState::from_array(x), &p).to_array();
            let want = reference_rhs(x, &p, literal);
            for k in 0..6 {
                let scale = want[k].abs().max(1e-12);
                assert!(
                    (got[k] - want[k]).abs() / scale < 1e-12,
                    "component {k}: {} vs {}",
                    got[k],
                    want[k]
                );
            }
        }
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn rk4_global_error_is_fourth_order() {
    let p = MLParams::default();
    let run = |dt: f64, every: usize| {
        let cfg = SimConfig {
            t_end: 100.0,
            dt,
            record_every: every,
            ..SimConfig::default()
        };
        simulate_deterministic(&p, NetworkState::default(), &cfg).unwrap()
    };
    let reference = run(0.05 / 8.0, 8 * 20);
    let errs: Vec<f64> = [1, 2, 4]
        .iter()
        .map(|&k| {
            let tr = run(0.05 / k as f64, k * 20);
            assert_eq!(tr.len(), reference.len());
            max_diff(&tr.v1, &reference.v1).max(max_diff(&tr.v2, &reference.v2))
        })
        .collect();
    // e(dt/4) still carries the reference's own error (about 1/16 of it).
    let r1 = errs[0] / errs[1];
    let r2 = errs[1] / errs[2];
    assert!((10.0..24.0).contains(&r1), "{errs:?}");
    assert!((10.0..24.0).contains(&r2), "{errs:?}");
    assert!(errs[0] / errs[2] > 150.0, "{errs:?}");
}

#[test]
fn gates_stay_in_unit_interval() {
    let cases = [(120.0, 7.5), (95.5, 0.15), (97.5, 0.2), (220.0, 1.0), (240.0, 9.0)];
    for (iapp, gsyn) in cases {
        let cfg = SimConfig {
            t_end: 500.0,
            record_gates: true,
            ..SimConfig::default()
        };
        let tr =
            simulate_deterministic(&MLParams::with_drive(iapp, gsyn), NetworkState::default(), &cfg)
                .unwrap();
        let g = tr.gates.unwrap();
        for ch in [&g.w1, &g.w2, &g.s1, &g.s2] {
            assert!(ch.iter().all(|&x| (-1e-6..=1.0 + 1e-6).contains(&x)));
        }
    }
}

#[test]
fn noise_free_stochastic_run_ignores_seed() {
    let cfg = SimConfig {
        t_end: 50.0,
        ..SimConfig::default()
    };
    let p = MLParams::default();
    let a = simulate_stochastic(&p, NetworkState::default(), &cfg, 1).unwrap();
    let b = simulate_stochastic(&p, NetworkState::default(), &cfg, 99).unwrap();
    assert_eq!(a.v1, b.v1);
    assert_eq!(a.v2, b.v2);
}

#[test]
fn seeded_noise_is_reproducible_and_seed_dependent() {
    let cfg = SimConfig {
        t_end: 50.0,
        ..SimConfig::default()
    };
    let p = MLParams {
        delta: 0.7,
        ..MLParams::with_drive(95.0, 0.15)
    };
    let a = simulate_stochastic(&p, NetworkState::default(), &cfg, 3).unwrap();
    let b = simulate_stochastic(&p, NetworkState::default(), &cfg, 3).unwrap();
    let c = simulate_stochastic(&p, NetworkState::default(), &cfg, 4).unwrap();
    assert_eq!(a.v1, b.v1);
    assert_eq!(a.v2, b.v2);
    assert_ne!(a.v1, c.v1);
}

#[test]
fn noise_produces_mixed_mode_oscillations() {
    let p = MLParams {
        delta: 0.7,
        ..MLParams::with_drive(95.0, 0.15)
    };
    let cfg = SimConfig {
        t_end: 3000.0,
        ..SimConfig::default()
    };
    let tr = simulate_stochastic(&p, NetworkState::default(), &cfg, 1).unwrap();
    for v in [&tr.v1, &tr.v2] {
        let tail = &v[v.len() / 5..];
        // Local maxima of a lightly averaged trace: small ones below threshold
        // and full spikes above 0 mV must both occur.
        let avg: Vec<f64> = tail.windows(21).map(|w| w.iter().sum::<f64>() / 21.0).collect();
        let peaks: Vec<f64> = avg
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] >= w[2])
            .map(|w| w[1])
            .collect();
        let small = peaks.iter().filter(|&&x| x < -20.0).count();
        let large = peaks.iter().filter(|&&x| x > 0.0).count();
        assert!(small > 10 && large > 3, "small {small}, large {large}");
    }
}

/// Weighted least squares solved directly with a QR factorization.
fn reference_local_fit(times: &[f64], values: &[f64], t0: f64, span: f64) -> [f64; 3] {
    let n = times.len();
    let k = ((span * n as f64).ceil() as usize).clamp(1, n);
    let mut d: Vec<f64> = times.iter().map(|t| (t - t0).abs()).collect();
    d.sort_by(f64::total_cmp);
    let h = d[k - 1];
    let rows: Vec<usize> = (0..n).filter(|&i| (times[i] - t0).abs() < h).collect();
    let m = rows.len();
    let mut a = DMatrix::zeros(m, 3);
    let mut b = DVector::zeros(m);
    for (r, &i) in rows.iter().enumerate() {
        let x = times[i] - t0;
        let w = (1.0 - ((x / h).abs()).powi(3)).powi(3).sqrt();
        a[(r, 0)] = w;
        a[(r, 1)] = w * x;
        a[(r, 2)] = w * x * x;
        b[r] = w * values[i];
    }
    let beta = a.svd(true, true).solve(&b, 1e-14).expect("full rank");
    [beta[0], beta[1], 2.0 * beta[2]]
}

#[test]
fn lwpr_matches_direct_weighted_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..40 {
        let n = rng.random_range(20..120);
        let mut t = 0.0;
        let times: Vec<f64> = (0..n)
            .map(|_| {
                t += rng.random_range(0.05..1.0);
                t
            })
            .collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let span = rng.random_range(0.2..1.0);
        let t0 = rng.random_range(times[0]..times[n - 1]);
        let got = lwpr_eval(&times, &values, t0, &LwprConfig::new(2, span)).unwrap();
        let want = reference_local_fit(&times, &values, t0, span);
        for (g, w) in [got.y, got.dy, got.d2y].iter().zip(want) {
            assert!((g - w).abs() <= 1e-8 * w.abs().max(1.0), "{g} vs {w}");
        }
    }
}

fn noisy_sine(seed: u64, sd: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let t: Vec<f64> = (0..400).map(|i| i as f64 * 4.0 * PI / 399.0).collect();
    let y = t.iter().map(|&t| t.sin() + noise.sample(&mut rng)).collect();
    (t, y)
}

#[test]
fn noisy_sine_wide_span_interior_point() {
    // A single period sampled at 200 points with a 53% neighborhood.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let t: Vec<f64> = (0..200).map(|i| i as f64 * 2.0 * PI / 199.0).collect();
    let y: Vec<f64> = t.iter().map(|&t| t.sin() + noise.sample(&mut rng)).collect();
    for t0 in (0..=30).map(|i| 1.6 + i as f64 * 0.1) {
        let f = lwpr_eval(&t, &y, t0, &LwprConfig::new(2, 0.53)).unwrap();
        assert!((f.d2y + t0.sin()).abs() < 0.15, "t0 = {t0}: {}", f.d2y);
    }
}

/// GCV from the hat matrix built column by column out of unit vectors.
fn reference_gcv(times: &[f64], values: &[f64], span: f64) -> f64 {
    let n = times.len();
    let mut trace = 0.0;
    let mut fitted = vec![0.0; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = smooth_trace(times, &e, &LwprConfig::new(2, span)).unwrap().y_hat;
        trace += col[j];
        for i in 0..n {
            fitted[i] += col[i] * values[j];
        }
    }
    let rss: f64 = values.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    n as f64 * rss / (n as f64 - trace).powi(2)
}

#[test]
fn gcv_matches_hat_matrix_reference_and_picks_interior_span() {
    let (t, y) = noisy_sine(11, 0.1);
    let (t, y) = (&t[..200], &y[..200]);
    let spans = [0.05, 0.3, 0.9];
    let mut best = (f64::INFINITY, 0.0);
    for &s in &spans {
        let got = gcv_score(t, y, &LwprConfig::new(2, s)).unwrap().unwrap();
        let want = reference_gcv(t, y, s);
        assert!((got - want).abs() < 1e-9 * want, "span {s}: {got} vs {want}");
        if want < best.0 {
            best = (want, s);
        }
    }
    let sel = gcv_select(t, y, &spans, 2).unwrap();
    assert_eq!(sel.span, best.1);
    assert_eq!(sel.span, 0.3);
}

fn autocorrelation_period(x: &[f64], dt: f64, min_lag: usize) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let ac = |lag: usize| -> f64 { c.iter().zip(&c[lag..]).map(|(a, b)| a * b).sum() };
    let (best, _) = (min_lag..x.len() / 2)
        .map(|l| (l, ac(l)))
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    best as f64 * dt
}

#[test]
fn smoothed_curvature_shares_the_voltage_period() {
    let cfg = SimConfig {
        t_end: 1500.0,
        record_every: 4,
        ..SimConfig::default()
    };
    let tr = simulate_deterministic(&MLParams::default(), NetworkState::default(), &cfg).unwrap();
    let tail = tr.window_from(500.0);
    let fit = smooth_trace(&tail.times, &tail.v1, &LwprConfig::new(2, 0.004)).unwrap();
    assert!(fit.d2y_hat.iter().all(|x| x.is_finite()));
    let dt = 0.2;
    let pv = autocorrelation_period(&tail.v1, dt, 50);
    let pc = autocorrelation_period(&fit.d2y_hat, dt, 50);
    assert!((pv - pc).abs() <= 2.0 * dt, "{pv} vs {pc}");
    assert!(pv > 20.0);
}

fn eas_power() -> (PowerCurve, PowerCurve) {
    let cfg = SimConfig {
        t_end: 2000.0,
        record_every: 2,
        ..SimConfig::default()
    };
    let tr = simulate_deterministic(&MLParams::default(), NetworkState::default(), &cfg).unwrap();
    let post = tr.window_from(300.0);
    let sm = LocalPolySmoother::new(&post.times, LwprConfig::new(2, 0.002)).unwrap();
    let p1 = cumulative_power(&post.times, &sm.second_derivative(&post.v1).unwrap(), 0).unwrap();
    let p2 = cumulative_power(&post.times, &sm.second_derivative(&post.v2).unwrap(), 1).unwrap();
    (p1, p2)
}

#[test]
fn eas_power_is_linear_and_scales_with_pleak() {
    let (p1, p2) = eas_power();
    for p in [&p1, &p2] {
        let fit = ols_line(&p.times, &p.power).unwrap();
        assert!(fit.r_squared > 0.99, "R^2 = {}", fit.r_squared);
        let half = ols_line(&p.times, &model_power(p, 0.5).power).unwrap();
        assert!((half.slope / fit.slope - 0.5).abs() < 1e-12);
        let p0 = p0_estimate(p).unwrap();
        let range = p.power[p.len() - 1] - p.power[0];
        assert!(p0 > 0.0 && p0 < 0.05 * range, "p0 {p0}, range {range}");
    }
}

fn log_pdf(x: f64, sd: f64) -> f64 {
    -(sd * (2.0 * PI).sqrt()).ln() - x * x / (2.0 * sd * sd)
}

#[test]
fn power_likelihood_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 300;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
    let data: Vec<f64> = times.iter().map(|t| 3.0 * t + rng.random_range(0.0..0.5)).collect();
    let model: Vec<f64> = data.iter().map(|d| d + rng.random_range(-2.0..2.0)).collect();
    let (p0, pscale) = (0.7, 0.3);
    let mk = |power: Vec<f64>| PowerCurve {
        times: times.clone(),
        power,
        channel: 0,
    };
    let got = power_log_likelihood(&mk(data.clone()), &mk(model.clone()), p0, pscale).unwrap();
    let want: f64 = data
        .iter()
        .zip(&model)
        .map(|(d, m)| log_pdf(d - m, p0 + pscale * d))
        .sum();
    assert!((got - want).abs() < 1e-10 * want.abs());

    let same = power_log_likelihood(&mk(data.clone()), &mk(data.clone()), p0, pscale).unwrap();
    let doubled =
        power_log_likelihood(&mk(data.clone()), &mk(data.clone()), 2.0 * p0, 2.0 * pscale).unwrap();
    assert!((same - doubled - n as f64 * 2f64.ln()).abs() < 1e-9);
}

#[test]
fn mean_likelihood_matches_direct_formula() {
    let got = mean_log_likelihood(3.0, 0.0, 10.0).unwrap();
    assert!((got - log_pdf(3.0, 10.0)).abs() < 1e-12);
    let zero = mean_log_likelihood(1.0, 1.0, 10.0).unwrap();
    let one_sd = mean_log_likelihood(11.0, 1.0, 10.0).unwrap();
    assert!((zero - one_sd - 0.5).abs() < 1e-12);
}

#[test]
fn fourier_slope_matches_quadrature() {
    let term = FourierTerm {
        a: 1.0,
        b: 0.0,
        freq: 1.0,
    };
    let c = fourier_power_slope(&[term]);
    assert!((c - 779.2727).abs() < 1e-4);
    // Simpson's rule on ∫ (m'')² over 50 periods, divided by the length.
    let (periods, per) = (50.0, 2000);
    let n = (periods as usize) * per;
    let h = periods / n as f64;
    let f = |t: f64| {
        let w = 2.0 * PI;
        (w * w * (w * t).cos()).powi(2)
    };
    let mut s = f(0.0) + f(periods);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = s * h / 3.0;
    assert!((integral / periods - c).abs() < 1e-6 * c);
}

fn synthetic_features() -> DataFeatures {
    let likelihood = LikelihoodConfig {
        data_span: SpanChoice::Fixed(0.006),
        ..LikelihoodConfig::fast()
    };
    let data =
        simulate_deterministic(&MLParams::default(), likelihood.ic, &likelihood.sim).unwrap();
    DataFeatures::new(&data, likelihood).unwrap()
}

#[test]
fn likelihood_prefers_generating_drive() {
    let f = synthetic_features();
    let at = |iapp: f64, gsyn: f64| {
        f.conditioned_log_likelihood(&Theta::with_drive(iapp, gsyn))
            .unwrap()
    };
    let truth = at(120.0, 7.5);
    assert!(truth.is_finite());
    assert!(truth > at(240.0, 7.5));
    // A steady-state drive flattens the model power.
    let ss = at(150.0, 10.0);
    let osc = at(125.0, 7.0);
    assert!(osc - ss > 300.0, "{osc} vs {ss}");
}

#[test]
fn posterior_prefers_generating_drive_over_strong_drive() {
    let f = synthetic_features();
    let region = FeasibleRegion::builtin();
    let post = Posterior {
        target: &f as &dyn LogTarget,
        region: &region,
        use_region: true,
        jacobian: true,
    };
    let truth = post.log_posterior(&Theta::with_drive(120.0, 7.5));
    let other = post.log_posterior(&Theta::with_drive(220.0, 7.5));
    assert!(truth > other);
    assert_eq!(other, f64::NEG_INFINITY);
    let inside_other = post.log_posterior(&Theta::with_drive(220.0, 1.0));
    assert!(truth > inside_other);
}

#[test]
fn gcv_selected_data_span_is_reported() {
    let likelihood = LikelihoodConfig {
        data_span: SpanChoice::Gcv(vec![0.004, 0.008, 0.016]),
        ..LikelihoodConfig::fast()
    };
    let data =
        simulate_deterministic(&MLParams::default(), likelihood.ic, &likelihood.sim).unwrap();
    let f = DataFeatures::new(&data, likelihood).unwrap();
    let sel = f.data_gcv.as_ref().unwrap();
    let best = sel
        .scores
        .iter()
        .filter_map(|(s, g)| g.map(|g| (*s, g)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!((best.1 - sel.scores.iter().find(|x| x.0 == f.data_span).unwrap().1.unwrap()).abs() <= 1e-9 * best.1);
    assert_eq!(f.model_span, f.data_span);
}
