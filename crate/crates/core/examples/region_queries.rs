//! The built-in oscillation region: area, triangulation and membership.
//!
//! `cargo run --release --example region_queries -- [gsyn,Iapp ...]`

use mlcouple::FeasibleRegion;

fn main() -> mlcouple::Result<()> {
    let region = FeasibleRegion::builtin();
    let [lo, hi] = region.bounding_box();
    println!(
        "{} vertices, {} triangles, area {:.3} (triangles sum to {:.3})",
        region.boundary().len(),
        region.triangles().len(),
        region.area(),
        region.triangle_area_sum()
    );
    println!("bounding box gsyn {:.3}..{:.3}, Iapp {:.3}..{:.3}", lo[0], hi[0], lo[1], hi[1]);
    println!("log prior inside: {:.4}", region.log_prior(7.5, 120.0));

    let mut points: Vec<(f64, f64)> = std::env::args()
        .skip(1)
        .filter_map(|s| {
            let (g, i) = s.split_once(',')?;
            Some((g.trim().parse().ok()?, i.trim().parse().ok()?))
        })
        .collect();
    if points.is_empty() {
        points = vec![(7.5, 120.0), (1.0, 220.0), (10.0, 150.0), (5.0, 250.0), (3.0, 90.0)];
    }
    for (g, i) in points {
        let verdict = if region.contains(g, i) { "inside" } else { "outside" };
        println!("gsyn {g:>6} Iapp {i:>7}: {verdict}");
    }
    region.write_csv(std::fs::File::create("region.csv")?)?;
    println!("wrote region.csv");
    Ok(())
}
