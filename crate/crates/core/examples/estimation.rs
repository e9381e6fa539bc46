//! Estimate (Iapp, gsyn) and the nuisance parameters from synthetic data, with
//! and without region rejection, on the short-window likelihood.
//!
//! `cargo run --release --example estimation -- [iterations]`

use mlcouple::features::{DataFeatures, LikelihoodConfig, SpanChoice};
use mlcouple::mcmc::{pool_summaries, run_chains, summarize, BurnIn, McmcConfig, Truth};
use mlcouple::sim::simulate_deterministic;
use mlcouple::{FeasibleRegion, MLParams};

fn main() -> mlcouple::Result<()> {
    let iterations: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let likelihood = LikelihoodConfig {
        data_span: SpanChoice::Fixed(0.006),
        ..LikelihoodConfig::fast()
    };
    let truth = MLParams::with_drive(120.0, 7.5);
    let data = simulate_deterministic(&truth, likelihood.ic, &likelihood.sim)?;
    let features = DataFeatures::new(&data, likelihood)?;
    println!("p0 = {:.3} / {:.3}", features.p0[0], features.p0[1]);

    let region = FeasibleRegion::builtin();
    let seeds = [1, 2, 3, 4, 5];
    let burn_in = iterations * 9 / 20;
    for use_region in [true, false] {
        let cfg = McmcConfig {
            iterations,
            burn_in: BurnIn::Fixed(burn_in),
            use_rejection_region: use_region,
            ..McmcConfig::default()
        };
        let chains = run_chains(&features, &cfg, &region, &seeds)?;
        let summaries = chains
            .iter()
            .map(|c| summarize(c, burn_in, &Truth::drive(120.0, 7.5)))
            .collect::<mlcouple::Result<Vec<_>>>()?;
        println!("region rejection {}", if use_region { "on" } else { "off" });
        for (seed, s) in seeds.iter().zip(&summaries) {
            let (i, g) = (s.param("Iapp").unwrap(), s.param("gsyn").unwrap());
            println!(
                "  seed {seed}: Iapp {:.2} ± {:.2}  gsyn {:.3} ± {:.3}  acceptance {:.2}",
                i.mean, i.sd, g.mean, g.sd, s.acceptance_rate
            );
        }
        for p in pool_summaries(&summaries).iter().take(2) {
            println!("  overall {}: {:.3} ({:.1}% error)", p.name, p.mean, p.percent_error.unwrap());
        }
    }
    Ok(())
}
