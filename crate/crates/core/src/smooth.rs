//! Locally weighted polynomial regression (LWPR) with a tricube kernel and a
//! nearest-neighbor bandwidth.
//!
//! At a query time `t0` the `⌈span·n⌉` nearest samples define the radius `h`
//! (the distance to the farthest of them) and each sample gets weight
//! `tricube((t − t0)/h)`. A polynomial in `(t − t0)` is fitted by weighted
//! least squares; its coefficients give the smoothed value and the first two
//! derivatives.
//!
//! The fit is linear in the sample values, so for a fixed time grid the whole
//! smoother is a sparse linear operator. [`LocalPolySmoother`] precomputes
//! that operator once and then smooths any number of signals on the same grid
//! with one dot product per point.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tricube kernel `(1 − |u|³)³` on `|u| < 1`, zero elsewhere.
pub fn tricube(u: f64) -> f64 {
    let a = u.abs();
    if a < 1.0 {
        let t = 1.0 - a * a * a;
        t * t * t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LwprConfig {
    pub degree: usize,
    /// Fraction of the samples that form each neighborhood, in `(0, 1]`.
    pub span: f64,
}

impl Default for LwprConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            span: 0.5,
        }
    }
}

impl LwprConfig {
    pub fn new(degree: usize, span: f64) -> Self {
        Self { degree, span }
    }

    fn validate(&self) -> Result<()> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "span {} must lie in (0, 1]",
                self.span
            )));
        }
        Ok(())
    }

    /// Neighborhood size for `n` samples.
    pub fn neighbors(&self, n: usize) -> usize {
        ((self.span * n as f64).ceil() as usize).clamp(1, n)
    }
}

/// Value and first two derivatives of a local fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    pub y: f64,
    pub dy: f64,
    pub d2y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSignal {
    pub times: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub dy_hat: Vec<f64>,
    pub d2y_hat: Vec<f64>,
    pub config: LwprConfig,
}

/// Equivalent-kernel weights of one local fit: `y = Σ value[j]·w0[j]` over
/// `j ∈ start..start + len`, and likewise for the derivatives.
#[derive(Debug, Clone)]
struct KernelRow {
    start: usize,
    value: Vec<f64>,
    slope: Vec<f64>,
    curvature: Vec<f64>,
}

impl KernelRow {
    fn apply(&self, values: &[f64]) -> LocalFit {
        let ys = &values[self.start..self.start + self.value.len()];
        let dot = |w: &[f64]| w.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>();
        LocalFit {
            y: dot(&self.value),
            dy: dot(&self.slope),
            d2y: dot(&self.curvature),
        }
    }
}

/// Indices `[lo, hi)` of the `k` samples nearest to `t0` in sorted `times`.
fn nearest_window(times: &[f64], t0: f64, k: usize) -> (usize, usize) {
    let n = times.len();
    let mut hi = times.partition_point(|&t| t < t0);
    let mut lo = hi;
    while hi - lo < k {
        let take_left = if lo == 0 {
            false
        } else if hi == n {
            true
        } else {
            t0 - times[lo - 1] <= times[hi] - t0
        };
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

fn kernel_row(times: &[f64], t0: f64, cfg: &LwprConfig) -> Result<KernelRow> {
    let n = times.len();
    let p = cfg.degree + 1;
    let k = cfg.neighbors(n);
    if n < p {
        return Err(Error::InsufficientData {
            t0,
            have: n,
            need: p,
        });
    }
    let (lo, hi) = nearest_window(times, t0, k);
    let h = (t0 - times[lo]).max(times[hi - 1] - t0);
    let window = &times[lo..hi];
    if h <= 0.0 {
        return Err(Error::SingularFit { t0 });
    }
    let weights: Vec<f64> = window.iter().map(|&t| tricube((t - t0) / h)).collect();
    let weighted = weights.iter().filter(|&&w| w > 0.0).count();
    if weighted < p {
        return Err(Error::InsufficientData {
            t0,
            have: weighted,
            need: p,
        });
    }
    let mut distinct = 0usize;
    let mut last = f64::NAN;
    for (&t, &w) in window.iter().zip(&weights) {
        if w > 0.0 && t != last {
            distinct += 1;
            last = t;
        }
    }
    if distinct < p {
        return Err(Error::SingularFit { t0 });
    }

    // Design matrix in the scaled coordinate u = (t − t0)/h.
    let m = window.len();
    let design = DMatrix::from_fn(m, p, |j, c| ((window[j] - t0) / h).powi(c as i32));
    let mut gram = DMatrix::<f64>::zeros(p, p);
    for j in 0..m {
        let row = design.row(j);
        gram += weights[j] * row.transpose() * row;
    }
    let inv = gram
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or(Error::SingularFit { t0 })?;
    // Columns of inv·Xᵀ·W map each sample value to the coefficients.
    let mut rows = vec![vec![0.0; m]; 3];
    for j in 0..m {
        let col = &inv * design.row(j).transpose() * weights[j];
        for (r, row) in rows.iter_mut().enumerate().take(p) {
            row[j] = col[r];
        }
    }
    let [value, mut slope, mut curvature] = rows.try_into().expect("three rows");
    slope.iter_mut().for_each(|x| *x /= h);
    curvature.iter_mut().for_each(|x| *x *= 2.0 / (h * h));
    Ok(KernelRow {
        start: lo,
        value,
        slope,
        curvature,
    })
}

fn check_inputs(times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch(format!(
            "{} times, {} values",
            times.len(),
            values.len()
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Malformed("times must be sorted".into()));
    }
    Ok(())
}

/// Local polynomial fit at an arbitrary query time.
pub fn lwpr_eval(times: &[f64], values: &[f64], t0: f64, cfg: &LwprConfig) -> Result<LocalFit> {
    cfg.validate()?;
    check_inputs(times, values)?;
    Ok(kernel_row(times, t0, cfg)?.apply(values))
}

/// The LWPR operator for a fixed, sorted time grid, evaluated at every sample.
#[derive(Debug, Clone)]
pub struct LocalPolySmoother {
    times: Vec<f64>,
    config: LwprConfig,
    rows: Vec<KernelRow>,
}

impl LocalPolySmoother {
    pub fn new(times: &[f64], config: LwprConfig) -> Result<Self> {
        config.validate()?;
        check_inputs(times, times)?;
        let rows = times
            .par_iter()
            .map(|&t0| kernel_row(times, t0, &config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: times.to_vec(),
            config,
            rows,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn config(&self) -> LwprConfig {
        self.config
    }

    pub fn smooth(&self, values: &[f64]) -> Result<SmoothedSignal> {
        check_inputs(&self.times, values)?;
        let n = self.times.len();
        let (mut y_hat, mut dy_hat, mut d2y_hat) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for row in &self.rows {
            let f = row.apply(values);
            y_hat.push(f.y);
            dy_hat.push(f.dy);
            d2y_hat.push(f.d2y);
        }
        Ok(SmoothedSignal {
            times: self.times.clone(),
            y_hat,
            dy_hat,
            d2y_hat,
            config: self.config,
        })
    }

    /// Second-derivative estimates only.
    pub fn second_derivative(&self, values: &[f64]) -> Result<Vec<f64>> {
        check_inputs(&self.times, values)?;
        Ok(self
            .rows
            .iter()
            .map(|row| {
                let ys = &values[row.start..row.start + row.curvature.len()];
                row.curvature.iter().zip(ys).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    /// Diagonal of the hat matrix: the weight each fitted value puts on its own datum.
    pub fn hat_diagonal(&self) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                i.checked_sub(row.start)
                    .and_then(|j| row.value.get(j))
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect()
    }

    /// Generalized cross-validation score `n·RSS / (n − tr H)²`, or `None`
    /// when the smoother interpolates (`tr H ≥ n`).
    pub fn gcv(&self, values: &[f64]) -> Result<Option<f64>> {
        let fit = self.smooth(values)?;
        let n = self.times.len() as f64;
        let rss: f64 = fit
            .y_hat
            .iter()
            .zip(values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let trace: f64 = self.hat_diagonal().iter().sum();
        let dof = n - trace;
        if !(dof > 0.0) || !rss.is_finite() {
            return Ok(None);
        }
        Ok(Some(n * rss / (dof * dof)))
    }
}

/// Smooth a sampled signal, evaluating the local fit at each sample's own time.
pub fn smooth_trace(times: &[f64], values: &[f64], cfg: &LwprConfig) -> Result<SmoothedSignal> {
    check_inputs(times, values)?;
    LocalPolySmoother::new(times, *cfg)?.smooth(values)
}

/// GCV score of a single configuration; `None` when the fit is singular,
/// the neighborhoods are too small, or the smoother interpolates.
pub fn gcv_score(times: &[f64], values: &[f64], cfg: &LwprConfig) -> Result<Option<f64>> {
    gcv_score_channels(times, &[values], cfg)
}

/// Sum of per-channel GCV scores for channels sharing one time grid.
fn gcv_score_channels(times: &[f64], channels: &[&[f64]], cfg: &LwprConfig) -> Result<Option<f64>> {
    for c in channels {
        check_inputs(times, c)?;
    }
    let smoother = match LocalPolySmoother::new(times, *cfg) {
        Ok(s) => s,
        Err(Error::SingularFit { .. } | Error::InsufficientData { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut total = 0.0;
    for c in channels {
        match smoother.gcv(c)? {
            Some(s) => total += s,
            None => return Ok(None),
        }
    }
    Ok(Some(total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvSelection {
    pub span: f64,
    /// `(span, score)` per candidate; `None` marks a failed fit.
    pub scores: Vec<(f64, Option<f64>)>,
}

/// Pick the candidate span with the smallest GCV score; near-ties go to the
/// larger span.
pub fn gcv_select(
    times: &[f64],
    values: &[f64],
    candidate_spans: &[f64],
    degree: usize,
) -> Result<GcvSelection> {
    gcv_select_channels(times, &[values], candidate_spans, degree)
}

/// Joint span selection for several channels on a shared grid, minimizing the
/// summed GCV score.
pub fn gcv_select_channels(
    times: &[f64],
    channels: &[&[f64]],
    candidate_spans: &[f64],
    degree: usize,
) -> Result<GcvSelection> {
    if candidate_spans.len() < 2 {
        return Err(Error::InvalidParams("need at least two candidate spans".into()));
    }
    let scores = candidate_spans
        .iter()
        .map(|&span| {
            let cfg = LwprConfig::new(degree, span);
            cfg.validate()?;
            Ok((span, gcv_score_channels(times, channels, &cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .filter_map(|(_, s)| *s)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::AllFailed);
    }
    // Compare on the scale of the data's own variance so that exact fits
    // (RSS at rounding level) tie.
    let n = times.len() as f64;
    let spread: f64 = channels
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        })
        .sum();
    let tol = 1e-9 * best + 1e-12 * spread;
    let span = scores
        .iter()
        .filter(|(_, s)| s.is_some_and(|s| s <= best + tol))
        .map(|(span, _)| *span)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GcvSelection { span, scores })
}
