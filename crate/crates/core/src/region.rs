//! The (gsyn, Iapp) region in which stable oscillations (EAS or AAS) exist,
//! used as a flat prior and as a rejection test on MCMC proposals.
//!
//! The boundary is a 24-point lookup table traced from limit-point
//! continuations: an upper branch falling from Iapp ≈ 238 at gsyn ≈ 0 to the
//! tip at gsyn = 9.08, and an almost flat lower branch near Iapp ≈ 95.9.
//! Membership is answered by triangulating the polygon once and testing the
//! triangles. The lower branch is not convex, so the triangulation is
//! boundary-respecting ear clipping rather than an unconstrained Delaunay
//! triangulation of the vertices.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A point in parameter space: `[gsyn, Iapp]`.
pub type Point = [f64; 2];

/// Upper branch, ordered by increasing gsyn.
const UPPER_BRANCH: [Point; 12] = [
    [0.007, 238.382],
    [0.832, 238.097],
    [1.657, 237.885],
    [2.482, 236.004],
    [3.306, 231.454],
    [4.131, 223.402],
    [4.956, 211.055],
    [5.781, 193.919],
    [6.606, 172.617],
    [7.430, 148.735],
    [8.255, 123.144],
    [9.080, 95.840],
];

/// Lower branch, ordered by decreasing gsyn.
const LOWER_BRANCH: [Point; 12] = [
    [9.019, 95.842],
    [8.199, 95.867],
    [7.380, 95.889],
    [6.561, 95.909],
    [5.742, 95.925],
    [4.923, 95.938],
    [4.103, 95.945],
    [3.284, 95.946],
    [2.465, 95.939],
    [1.646, 95.918],
    [0.826, 95.871],
    [0.000, 95.724],
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    boundary: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    area: f64,
    bbox: [Point; 2],
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Signed shoelace area; positive for counter-clockwise order.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(a, b, c).abs()
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |a: Point, b: Point, p: Point| {
        p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn check_simple(poly: &[Point]) -> Result<()> {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(Error::DegeneratePolygon(format!(
                    "edges {i} and {j} intersect"
                )));
            }
        }
    }
    Ok(())
}

/// Closed-triangle test with a small tolerance so points on shared edges are
/// never lost to rounding.
fn in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    let scale = triangle_area(a, b, c).max(f64::MIN_POSITIVE);
    let eps = -1e-12 * scale;
    let (d1, d2, d3) = (cross(a, b, p), cross(b, c, p), cross(c, a, p));
    let ccw = cross(a, b, c) > 0.0;
    if ccw {
        d1 >= eps && d2 >= eps && d3 >= eps
    } else {
        d1 <= -eps && d2 <= -eps && d3 <= -eps
    }
}

/// Ear-clipping triangulation of a simple polygon. Triangles index into
/// `poly`; vertices lying exactly on the segment between their neighbors are
/// dropped without emitting a triangle.
pub fn triangulate(poly: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::DegeneratePolygon(format!("{n} vertices")));
    }
    if poly.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::DegeneratePolygon("non-finite vertex".into()));
    }
    let area = signed_area(poly);
    if area == 0.0 {
        return Err(Error::DegeneratePolygon("zero area (collinear vertices)".into()));
    }
    check_simple(poly)?;

    let mut idx: Vec<usize> = (0..n).collect();
    if area < 0.0 {
        idx.reverse();
    }
    let scale = area.abs();
    let mut triangles = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            let turn = cross(a, b, c);
            if turn.abs() <= 1e-14 * scale {
                idx.remove(i);
                clipped = true;
                break;
            }
            if turn < 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ia
                    && j != ib
                    && j != ic
                    && poly[j] != a
                    && poly[j] != b
                    && poly[j] != c
                    && in_triangle(poly[j], a, b, c)
            });
            if !blocked {
                triangles.push([ia, ib, ic]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(Error::DegeneratePolygon("no ear found".into()));
        }
    }
    let (a, b, c) = (poly[idx[0]], poly[idx[1]], poly[idx[2]]);
    if cross(a, b, c).abs() > 1e-14 * scale {
        triangles.push([idx[0], idx[1], idx[2]]);
    }
    Ok(triangles)
}

impl FeasibleRegion {
    /// Build from boundary vertices in traversal order (either orientation).
    pub fn from_boundary(boundary: Vec<Point>) -> Result<Self> {
        let triangles = triangulate(&boundary)?;
        let area = signed_area(&boundary).abs();
        let mut bbox = [[f64::INFINITY; 2], [f64::NEG_INFINITY; 2]];
        for p in &boundary {
            for d in 0..2 {
                bbox[0][d] = bbox[0][d].min(p[d]);
                bbox[1][d] = bbox[1][d].max(p[d]);
            }
        }
        Ok(Self {
            boundary,
            triangles,
            area,
            bbox,
        })
    }

    /// The 24-vertex oscillation region: upper branch left to right, then the
    /// lower branch right to left.
    pub fn builtin() -> Self {
        let boundary = UPPER_BRANCH.iter().chain(&LOWER_BRANCH).copied().collect();
        Self::from_boundary(boundary).expect("built-in region is a simple polygon")
    }

    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Shoelace area (µA·mS·cm⁻⁴ for the built-in region).
    pub fn area(&self) -> f64 {
        self.area
    }

    /// `[[gsyn_min, Iapp_min], [gsyn_max, Iapp_max]]`.
    pub fn bounding_box(&self) -> [Point; 2] {
        self.bbox
    }

    pub fn triangle_area_sum(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_area(self.boundary[t[0]], self.boundary[t[1]], self.boundary[t[2]]))
            .sum()
    }

    /// Closed membership: boundary points are inside.
    pub fn contains(&self, gsyn: f64, iapp: f64) -> bool {
        let p = [gsyn, iapp];
        if !(p[0] >= self.bbox[0][0]
            && p[0] <= self.bbox[1][0]
            && p[1] >= self.bbox[0][1]
            && p[1] <= self.bbox[1][1])
        {
            return false;
        }
        self.triangles.iter().any(|t| {
            in_triangle(p, self.boundary[t[0]], self.boundary[t[1]], self.boundary[t[2]])
        })
    }

    /// Flat prior `1/area` inside, zero outside.
    pub fn log_prior(&self, gsyn: f64, iapp: f64) -> f64 {
        if self.contains(gsyn, iapp) {
            -self.area.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["gsyn", "Iapp"])?;
        for p in &self.boundary {
            wr.write_record([p[0].to_string(), p[1].to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Read a boundary from CSV with header `gsyn,Iapp`, rows in boundary order.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<&str> = rd.headers()?.iter().map(str::trim).collect();
        if header != ["gsyn", "Iapp"] {
            return Err(Error::Malformed(format!("unexpected region header {header:?}")));
        }
        let mut boundary = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Malformed(format!("region row {} has {} fields", row + 1, rec.len())));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|e| Error::Malformed(format!("region row {}: {s:?}: {e}", row + 1)))
            };
            boundary.push([parse(&rec[0])?, parse(&rec[1])?]);
        }
        Self::from_boundary(boundary)
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
