//! Local quadratic smoothing of a noisy sine with the span picked by GCV.
//!
//! `cargo run --release --example lwpr_gcv`

use mlcouple::smooth::{gcv_select, smooth_trace, LwprConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> mlcouple::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.05).expect("valid sd");
    let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.02).collect();
    let y: Vec<f64> = t.iter().map(|&t| t.sin() + noise.sample(&mut rng)).collect();

    let spans = [0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8];
    let sel = gcv_select(&t, &y, &spans, 2)?;
    for (s, score) in &sel.scores {
        match score {
            Some(g) => println!("span {s:<5} GCV {g:.3e}"),
            None => println!("span {s:<5} failed"),
        }
    }
    println!("selected span {}", sel.span);

    let fit = smooth_trace(&t, &y, &LwprConfig::new(2, sel.span))?;
    let interior = t.len() / 10..t.len() * 9 / 10;
    let max_err = |est: &[f64], f: fn(f64) -> f64| {
        interior
            .clone()
            .map(|i| (est[i] - f(t[i])).abs())
            .fold(0.0, f64::max)
    };
    println!("max interior error y   {:.4}", max_err(&fit.y_hat, f64::sin));
    println!("max interior error y'  {:.4}", max_err(&fit.dy_hat, f64::cos));
    println!("max interior error y'' {:.4}", max_err(&fit.d2y_hat, |t| -t.sin()));
    Ok(())
}
