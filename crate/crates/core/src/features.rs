//! Feature statistics of voltage traces and the likelihood conditioned on them.
//!
//! Two features are compared between data and model for each neuron: the
//! cumulative power `P(t) = ∫ (v″)²`, estimated from LWPR second derivatives,
//! and the mean voltage. The power residual at each sample is Gaussian with a
//! standard deviation that grows with the data's own power, `p0 + pscale·P`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{MLParams, NetworkState};
use crate::sim::{simulate_deterministic, SimConfig};
use crate::smooth::{gcv_select_channels, GcvSelection, LocalPolySmoother, LwprConfig};
use crate::trace::VoltageTrace;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `log N(x; mu, sd)`.
pub fn gaussian_log_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Cumulative power sampled at the data times of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub times: Vec<f64>,
    pub power: Vec<f64>,
    pub channel: usize,
}

impl PowerCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "P"])?;
        for (t, p) in self.times.iter().zip(&self.power) {
            wr.write_record([t.to_string(), p.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R, channel: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<&str> = rd.headers()?.iter().map(str::trim).collect();
        if header != ["t", "P"] {
            return Err(Error::Malformed(format!("unexpected power header {header:?}")));
        }
        let (mut times, mut power) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Malformed("short power row".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Malformed(format!("power CSV: {e}")))
            };
            times.push(parse(0)?);
            power.push(parse(1)?);
        }
        Ok(Self {
            times,
            power,
            channel,
        })
    }
}

/// Riemann sum `P(t_j) = Σ_{i≤j} Δt_i·(d2y_i)²` with `Δt_i = t_i − t_{i−1}`
/// and the first step reused for `i = 0`.
pub fn cumulative_power(times: &[f64], d2y: &[f64], channel: usize) -> Result<PowerCurve> {
    if times.len() != d2y.len() {
        return Err(Error::LengthMismatch(format!(
            "{} times, {} second derivatives",
            times.len(),
            d2y.len()
        )));
    }
    if times.len() < 2 {
        return Err(Error::LengthMismatch("need at least two samples".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Malformed("times must be strictly increasing".into()));
    }
    let mut acc = 0.0;
    let power = (0..times.len())
        .map(|i| {
            let dt = if i == 0 {
                times[1] - times[0]
            } else {
                times[i] - times[i - 1]
            };
            acc += dt * d2y[i] * d2y[i];
            acc
        })
        .collect();
    Ok(PowerCurve {
        times: times.to_vec(),
        power,
        channel,
    })
}

/// Model-side power scaled by the leak multiplier.
pub fn model_power(raw: &PowerCurve, pleak: f64) -> PowerCurve {
    PowerCurve {
        times: raw.times.clone(),
        power: raw.power.iter().map(|p| p * pleak).collect(),
        channel: raw.channel,
    }
}

/// Ordinary least-squares line `y ≈ intercept + slope·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Root mean square of the residuals (divisor n).
    pub rmse: f64,
    pub r_squared: f64,
}

pub fn ols_line(t: &[f64], y: &[f64]) -> Result<LineFit> {
    if t.len() != y.len() {
        return Err(Error::LengthMismatch(format!("{} vs {}", t.len(), y.len())));
    }
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - tm) * (x - tm)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateTimes);
    }
    let sxy: f64 = t.iter().zip(y).map(|(x, v)| (x - tm) * (v - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let rss: f64 = t
        .iter()
        .zip(y)
        .map(|(x, v)| {
            let r = v - intercept - slope * x;
            r * r
        })
        .sum();
    let tss: f64 = y.iter().map(|v| (v - ym) * (v - ym)).sum();
    Ok(LineFit {
        intercept,
        slope,
        rmse: (rss / n).sqrt(),
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
    })
}

/// Residual RMS of the straight-line fit of `P` on `t`.
pub fn p0_estimate(curve: &PowerCurve) -> Result<f64> {
    if curve.len() < 3 {
        return Err(Error::LengthMismatch("p0 needs at least three points".into()));
    }
    Ok(ols_line(&curve.times, &curve.power)?.rmse)
}

/// `Σ_j log N(P_data − P_model; 0, p0 + pscale·P_data)`.
pub fn power_log_likelihood(
    data: &PowerCurve,
    model: &PowerCurve,
    p0: f64,
    pscale: f64,
) -> Result<f64> {
    if data.len() != model.len() {
        return Err(Error::LengthMismatch(format!(
            "data power {} vs model power {}",
            data.len(),
            model.len()
        )));
    }
    let mut total = 0.0;
    for (index, (&pd, &pm)) in data.power.iter().zip(&model.power).enumerate() {
        let sd = p0 + pscale * pd;
        if !(sd > 0.0) {
            return Err(Error::NonPositiveSd { index, sd });
        }
        total += gaussian_log_pdf(pd - pm, 0.0, sd);
    }
    Ok(total)
}

/// `log N(vbar_data − vbar_model; 0, mstd)`.
pub fn mean_log_likelihood(vbar_data: f64, vbar_model: f64, mstd: f64) -> Result<f64> {
    if !(mstd > 0.0) {
        return Err(Error::NonPositiveSd { index: 0, sd: mstd });
    }
    Ok(gaussian_log_pdf(vbar_data - vbar_model, 0.0, mstd))
}

/// The eight estimated quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub iapp: f64,
    pub gsyn: f64,
    pub pscale: [f64; 2],
    pub pleak: [f64; 2],
    pub mstd: [f64; 2],
}

impl Theta {
    pub const NAMES: [&'static str; 8] = [
        "Iapp", "gsyn", "pscale1", "pscale2", "pleak1", "pleak2", "mstd1", "mstd2",
    ];

    /// Starting point with the customary nuisance guesses
    /// (`pscale = pleak = 1`, `mstd = 10 mV`).
    pub fn with_drive(iapp: f64, gsyn: f64) -> Self {
        Self {
            iapp,
            gsyn,
            pscale: [1.0; 2],
            pleak: [1.0; 2],
            mstd: [10.0; 2],
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.iapp,
            self.gsyn,
            self.pscale[0],
            self.pscale[1],
            self.pleak[0],
            self.pleak[1],
            self.mstd[0],
            self.mstd[1],
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            iapp: a[0],
            gsyn: a[1],
            pscale: [a[2], a[3]],
            pleak: [a[4], a[5]],
            mstd: [a[6], a[7]],
        }
    }

    pub fn is_positive(&self) -> bool {
        self.to_array().iter().all(|&x| x > 0.0 && x.is_finite())
    }
}

/// One term `a·cos(2πφt) + b·sin(2πφt)` of a Fourier series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierTerm {
    pub a: f64,
    pub b: f64,
    pub freq: f64,
}

/// Asymptotic growth rate of the cumulative power of a finite Fourier series:
/// `8π⁴ Σ φ⁴ (a² + b²)`.
pub fn fourier_power_slope(terms: &[FourierTerm]) -> f64 {
    8.0 * PI.powi(4)
        * terms
            .iter()
            .map(|t| t.freq.powi(4) * (t.a * t.a + t.b * t.b))
            .sum::<f64>()
}

/// How the LWPR span is chosen for one side of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanChoice {
    Fixed(f64),
    Gcv(Vec<f64>),
    /// Model side only: reuse the data span.
    SameAsData,
}

/// Everything the likelihood needs besides the data and theta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodConfig {
    /// Model constants; `iapp`/`gsyn` double as the reference drive for a
    /// GCV-selected model span.
    pub params: MLParams,
    pub ic: NetworkState,
    /// Must reproduce the data's sample times.
    pub sim: SimConfig,
    pub degree: usize,
    pub data_span: SpanChoice,
    pub model_span: SpanChoice,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self {
            params: MLParams::default(),
            ic: NetworkState::default(),
            sim: SimConfig::default(),
            degree: 2,
            data_span: SpanChoice::Gcv(default_span_grid()),
            model_span: SpanChoice::SameAsData,
        }
    }
}

impl LikelihoodConfig {
    /// Short-window variant for quick runs: 300 ms recorded every 0.1 ms.
    pub fn fast() -> Self {
        Self {
            sim: SimConfig {
                t_end: 300.0,
                record_every: 2,
                ..SimConfig::default()
            },
            ..Self::default()
        }
    }
}

/// Candidate spans used when GCV selection is requested without an explicit grid.
pub fn default_span_grid() -> Vec<f64> {
    vec![0.002, 0.003, 0.004, 0.006, 0.008, 0.012, 0.016, 0.024, 0.032]
}

/// Per-neuron components of the conditioned log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodTerms {
    pub power: [f64; 2],
    pub mean: [f64; 2],
}

impl LikelihoodTerms {
    pub fn total(&self) -> f64 {
        self.power[0] + self.power[1] + self.mean[0] + self.mean[1]
    }
}

/// Data-side quantities computed once per dataset.
#[derive(Debug, Clone)]
pub struct DataFeatures {
    pub config: LikelihoodConfig,
    pub times: Vec<f64>,
    pub power: [PowerCurve; 2],
    pub p0: [f64; 2],
    pub mean_voltage: [f64; 2],
    pub data_span: f64,
    pub model_span: f64,
    pub data_gcv: Option<GcvSelection>,
    pub model_gcv: Option<GcvSelection>,
    model_smoother: LocalPolySmoother,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn resolve_span(
    choice: &SpanChoice,
    times: &[f64],
    channels: [&[f64]; 2],
    degree: usize,
) -> Result<(f64, Option<GcvSelection>)> {
    match choice {
        SpanChoice::Fixed(s) => Ok((*s, None)),
        SpanChoice::Gcv(grid) => {
            let sel = gcv_select_channels(times, &channels, grid, degree)?;
            Ok((sel.span, Some(sel)))
        }
        SpanChoice::SameAsData => Err(Error::InvalidParams(
            "the data span cannot refer to itself".into(),
        )),
    }
}

impl DataFeatures {
    pub fn new(data: &VoltageTrace, config: LikelihoodConfig) -> Result<Self> {
        data.validate()?;
        let times = config.sim.record_times();
        if times.len() != data.len()
            || times
                .iter()
                .zip(&data.times)
                .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()))
        {
            return Err(Error::LengthMismatch(format!(
                "data grid ({} samples) does not match the simulation grid ({} samples, dt = {}, every {})",
                data.len(),
                times.len(),
                config.sim.dt,
                config.sim.record_every
            )));
        }
        let (data_span, data_gcv) =
            resolve_span(&config.data_span, &data.times, [&data.v1, &data.v2], config.degree)?;
        let data_smoother =
            LocalPolySmoother::new(&data.times, LwprConfig::new(config.degree, data_span))?;
        let curve = |k: usize| -> Result<PowerCurve> {
            let d2 = data_smoother.second_derivative(data.voltage(k))?;
            cumulative_power(&data.times, &d2, k)
        };
        let power = [curve(0)?, curve(1)?];
        let p0 = [p0_estimate(&power[0])?, p0_estimate(&power[1])?];
        let mean_voltage = [mean(&data.v1), mean(&data.v2)];

        let (model_span, model_gcv) = match &config.model_span {
            SpanChoice::SameAsData => (data_span, None),
            choice => {
                let reference = simulate_deterministic(&config.params, config.ic, &config.sim)
                    .map_err(|e| Error::SimulationFailed(Box::new(e)))?;
                resolve_span(choice, &reference.times, [&reference.v1, &reference.v2], config.degree)?
            }
        };
        let model_smoother = if model_span == data_span {
            data_smoother
        } else {
            LocalPolySmoother::new(&data.times, LwprConfig::new(config.degree, model_span))?
        };
        Ok(Self {
            config,
            times: data.times.clone(),
            power,
            p0,
            mean_voltage,
            data_span,
            model_span,
            data_gcv,
            model_gcv,
            model_smoother,
        })
    }

    /// Simulate at theta's drive and return the raw (pleak = 1) model power
    /// curves and mean voltages.
    pub fn model_features(&self, iapp: f64, gsyn: f64) -> Result<([PowerCurve; 2], [f64; 2])> {
        let params = MLParams {
            iapp,
            gsyn,
            ..self.config.params
        };
        let trace = simulate_deterministic(&params, self.config.ic, &self.config.sim)
            .map_err(|e| Error::SimulationFailed(Box::new(e)))?;
        let curve = |k: usize| -> Result<PowerCurve> {
            let d2 = self.model_smoother.second_derivative(trace.voltage(k))?;
            cumulative_power(&self.times, &d2, k)
        };
        Ok(([curve(0)?, curve(1)?], [mean(&trace.v1), mean(&trace.v2)]))
    }

    /// Component log-likelihoods of theta; their sum is the log of the
    /// conditioned likelihood.
    pub fn log_likelihood_terms(&self, theta: &Theta) -> Result<LikelihoodTerms> {
        if !theta.is_positive() {
            return Err(Error::InvalidParams(format!(
                "theta components must be positive: {theta:?}"
            )));
        }
        let (raw, vbar) = self.model_features(theta.iapp, theta.gsyn)?;
        let mut terms = LikelihoodTerms {
            power: [0.0; 2],
            mean: [0.0; 2],
        };
        for k in 0..2 {
            let model = model_power(&raw[k], theta.pleak[k]);
            terms.power[k] =
                power_log_likelihood(&self.power[k], &model, self.p0[k], theta.pscale[k])?;
            terms.mean[k] = mean_log_likelihood(self.mean_voltage[k], vbar[k], theta.mstd[k])?;
        }
        Ok(terms)
    }

    pub fn conditioned_log_likelihood(&self, theta: &Theta) -> Result<f64> {
        Ok(self.log_likelihood_terms(theta)?.total())
    }
}
