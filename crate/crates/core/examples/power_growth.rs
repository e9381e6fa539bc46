//! Cumulative power of a periodic signal grows linearly in time; a pulse's
//! power saturates. The model's own voltage behaves like the periodic case.
//!
//! `cargo run --release --example power_growth`

use std::f64::consts::PI;

use mlcouple::features::{cumulative_power, fourier_power_slope, ols_line, FourierTerm};
use mlcouple::sim::{simulate_deterministic, SimConfig};
use mlcouple::smooth::{LocalPolySmoother, LwprConfig};
use mlcouple::{MLParams, NetworkState};

fn main() -> mlcouple::Result<()> {
    let terms = [
        FourierTerm { a: 1.0, b: 0.5, freq: 0.5 },
        FourierTerm { a: -0.3, b: 0.2, freq: 1.5 },
    ];
    let dt = 1e-3;
    let t: Vec<f64> = (0..=40_000).map(|i| i as f64 * dt).collect();
    let d2: Vec<f64> = t
        .iter()
        .map(|&t| {
            terms
                .iter()
                .map(|f| {
                    let w = 2.0 * PI * f.freq;
                    -w * w * (f.a * (w * t).cos() + f.b * (w * t).sin())
                })
                .sum()
        })
        .collect();
    let p = cumulative_power(&t, &d2, 0)?;
    let fit = ols_line(&p.times, &p.power)?;
    println!(
        "Fourier series: slope {:.4}, predicted {:.4}",
        fit.slope,
        fourier_power_slope(&terms)
    );

    let sigma = 1.0;
    let pulse: Vec<f64> = t
        .iter()
        .map(|&t| {
            let u = (t - 2.0) / sigma;
            (u * u - 1.0) / (sigma * sigma) * (-0.5 * u * u).exp()
        })
        .collect();
    let p = cumulative_power(&t, &pulse, 0)?;
    let at = |x: f64| p.power[((x / dt).round() as usize).min(p.len() - 1)];
    println!(
        "Gaussian pulse: P(7) = {:.6}, P(12) = {:.6}, P(40) = {:.6}",
        at(7.0),
        at(12.0),
        at(40.0)
    );

    let sim = SimConfig {
        t_end: 2000.0,
        ..SimConfig::default()
    };
    let trace = simulate_deterministic(&MLParams::default(), NetworkState::default(), &sim)?;
    let smoother = LocalPolySmoother::new(&trace.times, LwprConfig::new(2, 0.002))?;
    for k in 0..2 {
        let d2 = smoother.second_derivative(trace.voltage(k))?;
        let p = cumulative_power(&trace.times, &d2, k)?;
        let fit = ols_line(&p.times, &p.power)?;
        println!(
            "neuron {}: P(end) {:.2}, slope {:.4} per ms, R^2 {:.5}",
            k + 1,
            p.power[p.len() - 1],
            fit.slope,
            fit.r_squared
        );
    }
    Ok(())
}
