//! Noise-driven mixed-mode oscillations near the onset of oscillation.
//! Writes `mmo.csv` with gate variables.
//!
//! `cargo run --release --example stochastic_mmo -- [delta] [seed]`

use mlcouple::sim::{simulate_stochastic, SimConfig};
use mlcouple::{MLParams, NetworkState};

fn main() -> mlcouple::Result<()> {
    let mut args = std::env::args().skip(1);
    let delta: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.7);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let params = MLParams {
        delta,
        ..MLParams::with_drive(95.0, 0.15)
    };
    let sim = SimConfig {
        t_end: 2000.0,
        record_gates: true,
        ..SimConfig::default()
    };
    let trace = simulate_stochastic(&params, NetworkState::default(), &sim, seed)?;

    // Count large excursions (spikes above 0 mV) between small-amplitude stretches.
    for (k, v) in [&trace.v1, &trace.v2].into_iter().enumerate() {
        let spikes = v.windows(2).filter(|w| w[0] < 0.0 && w[1] >= 0.0).count();
        let tail = &v[v.len() / 2..];
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("neuron {}: {spikes} spikes, range {lo:.1}..{hi:.1} mV", k + 1);
    }
    trace.write_csv_file("mmo.csv")?;
    println!("wrote mmo.csv ({} samples, delta = {delta}, seed = {seed})", trace.len());
    Ok(())
}
