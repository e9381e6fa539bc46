//! Deterministic runs in the steady, asymmetric and equal-amplitude regimes.
//!
//! `cargo run --release --example regimes`

use mlcouple::sim::{classify_dynamics, simulate_deterministic, ClassifierConfig, SimConfig};
use mlcouple::{MLParams, NetworkState};

fn main() -> mlcouple::Result<()> {
    let sim = SimConfig {
        t_end: 3000.0,
        ..SimConfig::default()
    };
    let aas_ic = NetworkState::parse_csv("-3,-20,0,0.17,0,0")?;
    let cases = [
        ("steady", 95.5, 0.15, NetworkState::default()),
        ("asymmetric", 97.5, 0.15, aas_ic),
        ("equal, weak coupling", 97.5, 0.2, aas_ic),
        ("default drive", 120.0, 7.5, NetworkState::default()),
        ("strong drive", 220.0, 1.0, NetworkState::default()),
    ];
    for (name, iapp, gsyn, ic) in cases {
        let p = MLParams::with_drive(iapp, gsyn);
        let trace = simulate_deterministic(&p, ic, &sim)?;
        let label = classify_dynamics(&trace, &ClassifierConfig::default())?;
        println!(
            "{name:<22} Iapp {iapp:>6} gsyn {gsyn:>5}: {} (amplitudes {:.1} / {:.1} mV, {})",
            label.kind, label.amplitudes[0], label.amplitudes[1], label.phase_relation
        );
    }
    Ok(())
}
