//! Simulation and Bayesian parameter estimation for a pair of reciprocally
//! coupled Morris-Lecar neurons.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the numerics.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod features;
pub mod mcmc;
pub mod params;
pub mod region;
pub mod sim;
pub mod smooth;
pub mod trace;

pub use error::{Error, Result};
pub use features::{DataFeatures, LikelihoodConfig, Theta};
pub use mcmc::{McmcConfig, run_chain};
pub use params::{MLParams, NetworkState};
pub use region::FeasibleRegion;
pub use trace::VoltageTrace;
