//! Metropolis-Hastings sampling of [`Theta`] in log space.
//!
//! Proposals are symmetric Gaussian steps on `log θ`. When rejection sampling
//! is enabled, a candidate whose `(gsyn, Iapp)` falls outside the feasible
//! region is rejected before the target density is evaluated, so no
//! simulation is spent on it.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DataFeatures, LikelihoodConfig, Theta};
use crate::region::FeasibleRegion;
use crate::trace::VoltageTrace;

/// Unnormalized log density over theta in natural units. Failures and
/// unsupported points return `-inf`.
pub trait LogTarget {
    fn log_density(&self, theta: &Theta) -> f64;
}

impl<F: Fn(&Theta) -> f64> LogTarget for F {
    fn log_density(&self, theta: &Theta) -> f64 {
        self(theta)
    }
}

impl LogTarget for DataFeatures {
    fn log_density(&self, theta: &Theta) -> f64 {
        self.conditioned_log_likelihood(theta)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnIn {
    Fixed(usize),
    /// First index `i ≥ 2w` at which the mean of `log Iapp` over `[i − w, i)`
    /// differs from the mean over `[i − 2w, i − w)` by less than `tol`.
    Auto { window: usize, tol: f64 },
}

impl BurnIn {
    pub fn auto() -> Self {
        Self::Auto {
            window: 100,
            tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub initial_theta: Theta,
    /// Proposal standard deviations of `log θ` before burn-in.
    pub mixing: [f64; 8],
    /// Proposal standard deviations after burn-in.
    pub post_burnin_mixing: [f64; 8],
    pub iterations: usize,
    pub burn_in: BurnIn,
    pub seed: u64,
    pub use_rejection_region: bool,
    /// Accept only strict improvements instead of the Metropolis rule.
    pub greedy: bool,
    /// Add `Σ log θ_i`, the change of variables for sampling `log θ` under a
    /// prior that is flat in natural units.
    pub jacobian: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            initial_theta: Theta::with_drive(220.0, 1.0),
            mixing: [0.01; 8],
            post_burnin_mixing: [0.001; 8],
            iterations: 1000,
            burn_in: BurnIn::Fixed(450),
            seed: 1,
            use_rejection_region: true,
            greedy: false,
            jacobian: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self
            .mixing
            .iter()
            .chain(&self.post_burnin_mixing)
            .any(|&m| !(m > 0.0 && m.is_finite()))
        {
            return Err(Error::InvalidParams("mixing values must be positive".into()));
        }
        if !self.initial_theta.is_positive() {
            return Err(Error::InvalidParams("initial theta must be positive".into()));
        }
        match self.burn_in {
            BurnIn::Fixed(b) if self.iterations > 0 && b >= self.iterations => Err(
                Error::InvalidParams(format!(
                    "burn-in {b} must be smaller than iterations {}",
                    self.iterations
                )),
            ),
            BurnIn::Auto { window: 0, .. } => {
                Err(Error::InvalidParams("auto burn-in window must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRecord {
    pub theta: Theta,
    pub log_posterior: f64,
    pub accepted: bool,
    pub in_region: bool,
    /// Log posterior of the candidate drawn at this step (`-inf` if it was
    /// rejected by the region). Equal to `log_posterior` for the initial record.
    pub candidate_log_posterior: f64,
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub records: Vec<ChainRecord>,
    pub config: McmcConfig,
    /// Index at which the proposal switched to the post-burn-in mixing.
    pub burn_in_index: usize,
    pub acceptance_rate: f64,
}

/// Posterior pieces that do not depend on the sampler state.
pub struct Posterior<'a, T: LogTarget + ?Sized> {
    pub target: &'a T,
    pub region: &'a FeasibleRegion,
    pub use_region: bool,
    pub jacobian: bool,
}

impl<T: LogTarget + ?Sized> Posterior<'_, T> {
    /// Log prior + log target + optional Jacobian. With the region enabled an
    /// outside candidate returns `-inf` without touching the target.
    pub fn log_posterior(&self, theta: &Theta) -> f64 {
        if !theta.is_positive() {
            return f64::NEG_INFINITY;
        }
        let prior = if self.use_region {
            let lp = self.region.log_prior(theta.gsyn, theta.iapp);
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            lp
        } else {
            0.0
        };
        let jac = if self.jacobian {
            theta.to_array().iter().map(|x| x.ln()).sum()
        } else {
            0.0
        };
        let lt = self.target.log_density(theta);
        if lt.is_nan() {
            return f64::NEG_INFINITY;
        }
        prior + lt + jac
    }
}

/// Log-normal random-walk proposal: `θ_i · exp(mixing_i · z_i)`.
pub fn propose<R: Rng + ?Sized>(current: &Theta, mixing: &[f64; 8], rng: &mut R) -> Theta {
    let cur = current.to_array();
    Theta::from_array(std::array::from_fn(|i| {
        let z: f64 = StandardNormal.sample(rng);
        (cur[i].ln() + mixing[i] * z).exp()
    }))
}

/// Metropolis acceptance for a log-posterior difference. `u` is uniform on [0, 1).
pub fn accept(delta: f64, u: f64, greedy: bool) -> bool {
    if delta > 0.0 {
        true
    } else if greedy || delta.is_nan() {
        false
    } else {
        u < delta.exp()
    }
}

/// One Metropolis-Hastings transition.
pub fn mh_step<T: LogTarget + ?Sized, R: Rng + ?Sized>(
    current: &ChainRecord,
    mixing: &[f64; 8],
    greedy: bool,
    posterior: &Posterior<'_, T>,
    rng: &mut R,
) -> ChainRecord {
    let candidate = propose(&current.theta, mixing, rng);
    let u: f64 = rng.random();
    let cand_lp = posterior.log_posterior(&candidate);
    let delta = cand_lp - current.log_posterior;
    if accept(delta, u, greedy) {
        ChainRecord {
            theta: candidate,
            log_posterior: cand_lp,
            accepted: true,
            in_region: posterior.region.contains(candidate.gsyn, candidate.iapp),
            candidate_log_posterior: cand_lp,
        }
    } else {
        ChainRecord {
            accepted: false,
            candidate_log_posterior: cand_lp,
            ..*current
        }
    }
}

fn detect_burn_in(records: &[ChainRecord], window: usize, tol: f64) -> bool {
    let i = records.len();
    if i < 2 * window {
        return false;
    }
    let mean_log_iapp = |r: &[ChainRecord]| {
        r.iter().map(|x| x.theta.iapp.ln()).sum::<f64>() / r.len() as f64
    };
    let recent = mean_log_iapp(&records[i - window..i]);
    let before = mean_log_iapp(&records[i - 2 * window..i - window]);
    (recent - before).abs() < tol
}

/// Run a chain against an arbitrary target density.
pub fn run_chain_with_target<T: LogTarget + ?Sized>(
    target: &T,
    config: &McmcConfig,
    region: &FeasibleRegion,
) -> Result<Chain> {
    config.validate()?;
    let init = config.initial_theta;
    if config.use_rejection_region && !region.contains(init.gsyn, init.iapp) {
        return Err(Error::InitialOutsideRegion {
            gsyn: init.gsyn,
            iapp: init.iapp,
        });
    }
    let posterior = Posterior {
        target,
        region,
        use_region: config.use_rejection_region,
        jacobian: config.jacobian,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lp0 = posterior.log_posterior(&init);
    let mut records = Vec::with_capacity(config.iterations + 1);
    records.push(ChainRecord {
        theta: init,
        log_posterior: lp0,
        accepted: true,
        in_region: region.contains(init.gsyn, init.iapp),
        candidate_log_posterior: lp0,
    });
    let mut burn_in_index = match config.burn_in {
        BurnIn::Fixed(b) => Some(b),
        BurnIn::Auto { .. } => None,
    };
    let mut accepted = 0usize;
    for i in 1..=config.iterations {
        if burn_in_index.is_none() {
            if let BurnIn::Auto { window, tol } = config.burn_in {
                if detect_burn_in(&records, window, tol) {
                    burn_in_index = Some(i - 1);
                }
            }
        }
        let mixing = match burn_in_index {
            Some(b) if i > b => &config.post_burnin_mixing,
            _ => &config.mixing,
        };
        let next = mh_step(
            records.last().expect("chain is never empty"),
            mixing,
            config.greedy,
            &posterior,
            &mut rng,
        );
        accepted += usize::from(next.accepted);
        records.push(next);
    }
    let acceptance_rate = if config.iterations > 0 {
        accepted as f64 / config.iterations as f64
    } else {
        0.0
    };
    Ok(Chain {
        records,
        config: config.clone(),
        burn_in_index: burn_in_index.unwrap_or(config.iterations).min(config.iterations),
        acceptance_rate,
    })
}

/// Run a chain on the coupled-neuron likelihood against observed data.
pub fn run_chain(
    data: &VoltageTrace,
    likelihood: LikelihoodConfig,
    config: &McmcConfig,
    region: &FeasibleRegion,
) -> Result<Chain> {
    let features = DataFeatures::new(data, likelihood)?;
    run_chain_with_target(&features, config, region)
}

/// Run one chain per seed in parallel, sharing the data-side features.
pub fn run_chains<T: LogTarget + Sync + ?Sized>(
    target: &T,
    config: &McmcConfig,
    region: &FeasibleRegion,
    seeds: &[u64],
) -> Result<Vec<Chain>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = McmcConfig {
                seed,
                ..config.clone()
            };
            run_chain_with_target(target, &cfg, region)
        })
        .collect()
}

/// Statistics of one parameter over the post-burn-in window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub log_mean: f64,
    pub log_sd: f64,
    pub truth: Option<f64>,
    pub percent_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub burn_in: usize,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub params: Vec<ParamSummary>,
}

impl ChainSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Known values for any subset of the theta components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Truth(pub [Option<f64>; 8]);

impl Truth {
    pub fn drive(iapp: f64, gsyn: f64) -> Self {
        let mut t = [None; 8];
        t[0] = Some(iapp);
        t[1] = Some(gsyn);
        Self(t)
    }
}

fn percent_error(mean: f64, truth: f64) -> f64 {
    (mean - truth).abs() / truth.abs() * 100.0
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = if x.len() > 1 {
        (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

/// Post-burn-in sample statistics of each theta component. Records with index
/// `> burn_in` are used; the initial record is index 0.
pub fn summarize(chain: &Chain, burn_in: usize, truth: &Truth) -> Result<ChainSummary> {
    let len = chain.records.len();
    let start = if burn_in == 0 { 0 } else { burn_in + 1 };
    if start >= len {
        return Err(Error::EmptyWindow { burn_in, len });
    }
    let window = &chain.records[start..];
    let params = (0..8)
        .map(|k| {
            let vals: Vec<f64> = window.iter().map(|r| r.theta.to_array()[k]).collect();
            let logs: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
            let (mean, sd) = mean_sd(&vals);
            let (log_mean, log_sd) = mean_sd(&logs);
            let t = truth.0[k];
            ParamSummary {
                name: Theta::NAMES[k].to_string(),
                mean,
                sd,
                log_mean,
                log_sd,
                truth: t,
                percent_error: t.map(|t| percent_error(mean, t)),
            }
        })
        .collect();
    Ok(ChainSummary {
        burn_in,
        samples: window.len(),
        acceptance_rate: chain.acceptance_rate,
        params,
    })
}

/// Across-chain result: the mean of the per-chain means, as in a table of
/// independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledParam {
    pub name: String,
    pub mean: f64,
    pub mean_of_sds: f64,
    pub truth: Option<f64>,
    pub percent_error: Option<f64>,
}

pub fn pool_summaries(summaries: &[ChainSummary]) -> Vec<PooledParam> {
    if summaries.is_empty() {
        return Vec::new();
    }
    let n = summaries.len() as f64;
    (0..summaries[0].params.len())
        .map(|k| {
            let p0 = &summaries[0].params[k];
            let mean = summaries.iter().map(|s| s.params[k].mean).sum::<f64>() / n;
            let mean_of_sds = summaries.iter().map(|s| s.params[k].sd).sum::<f64>() / n;
            PooledParam {
                name: p0.name.clone(),
                mean,
                mean_of_sds,
                truth: p0.truth,
                percent_error: p0.truth.map(|t| percent_error(mean, t)),
            }
        })
        .collect()
}

const CHAIN_HEADER: [&str; 11] = [
    "iter", "accepted", "log_post", "Iapp", "gsyn", "pscale1", "pscale2", "pleak1", "pleak2",
    "mstd1", "mstd2",
];

impl Chain {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_records_csv(&self.records, w)
    }
}

pub fn write_records_csv<W: Write>(records: &[ChainRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CHAIN_HEADER)?;
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            u8::from(r.accepted).to_string(),
            r.log_posterior.to_string(),
        ];
        row.extend(r.theta.to_array().iter().map(|x| x.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Read records written by [`Chain::write_csv`]. `in_region` and the
/// candidate log posterior are not stored; they are filled from `region`
/// and the record's own log posterior.
pub fn read_records_csv<R: Read>(r: R, region: &FeasibleRegion) -> Result<Vec<ChainRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<&str> = rd.headers()?.iter().map(str::trim).collect();
    if header != CHAIN_HEADER {
        return Err(Error::Malformed(format!("unexpected chain header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Malformed(format!("chain CSV {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != CHAIN_HEADER.len() {
            return Err(Error::Malformed("short chain row".into()));
        }
        let theta = Theta::from_array(std::array::from_fn(|i| vals[3 + i]));
        out.push(ChainRecord {
            theta,
            log_posterior: vals[2],
            accepted: vals[1] != 0.0,
            in_region: region.contains(theta.gsyn, theta.iapp),
            candidate_log_posterior: vals[2],
        });
    }
    Ok(out)
}
