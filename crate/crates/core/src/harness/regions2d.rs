//! Exact region count of a two-dimensional hyperplane arrangement.
//!
//! For lines in the plane, the open cells of the arrangement correspond
//! one-to-one to the feasible strict sign patterns: each pattern's region is
//! an intersection of open half-planes, hence convex and connected. The count
//! is obtained by recursively clipping a bounding box against both sides of
//! every line and descending only into non-empty polygons, which visits
//! O(cells · n) polygons instead of 2^n.

use crate::error::{Error, Result};

const MAX_UNITS: usize = 20;
/// Polygons thinner than this fraction of the clip box are treated as empty.
const REL_AREA_EPS: f64 = 1e-13;

type Point = [f64; 2];

/// Counts the non-empty strict sign regions of `w·x + b` over the given
/// units. Units with `w = 0` contribute a constant sign and no boundary, so
/// they do not split anything (matching how a sampled activation pattern
/// treats them).
pub fn exact_regions_2d(hyperplanes: &[([f64; 2], f64)]) -> Result<u64> {
    if hyperplanes.len() > MAX_UNITS {
        return Err(Error::TooLarge(format!(
            "exact region counting is capped at {MAX_UNITS} units, got {}",
            hyperplanes.len()
        )));
    }
    if hyperplanes.iter().any(|(w, b)| {
        !w[0].is_finite() || !w[1].is_finite() || !b.is_finite()
    }) {
        return Err(Error::Config("hyperplanes must be finite".into()));
    }
    let lines: Vec<([f64; 2], f64)> = hyperplanes
        .iter()
        .copied()
        .filter(|(w, _)| w[0] != 0.0 || w[1] != 0.0)
        .collect();
    if lines.is_empty() {
        return Ok(1);
    }

    // Box radius: beyond every line offset and every pairwise intersection,
    // so each open cell meets the box interior.
    let mut radius = 1.0_f64;
    for (w, b) in &lines {
        let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        radius = radius.max(b.abs() / norm);
    }
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (wi, bi) = lines[i];
            let (wj, bj) = lines[j];
            let det = wi[0] * wj[1] - wi[1] * wj[0];
            let scale = (wi[0].abs() + wi[1].abs()) * (wj[0].abs() + wj[1].abs());
            if det.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                let x = (-bi * wj[1] + bj * wi[1]) / det;
                let y = (-wi[0] * bj + wj[0] * bi) / det;
                radius = radius.max(x.abs()).max(y.abs());
            }
        }
    }
    let r = 4.0 * (radius + 1.0);
    let bbox = vec![[-r, -r], [r, -r], [r, r], [-r, r]];
    let area_eps = REL_AREA_EPS * r * r;
    Ok(count_cells(&bbox, &lines, 0, area_eps))
}

fn count_cells(poly: &[Point], lines: &[([f64; 2], f64)], idx: usize, eps: f64) -> u64 {
    if polygon_area(poly) <= eps {
        return 0;
    }
    if idx == lines.len() {
        return 1;
    }
    let (w, b) = lines[idx];
    let plus = clip(poly, w, b, 1.0);
    let minus = clip(poly, w, b, -1.0);
    count_cells(&plus, lines, idx + 1, eps) + count_cells(&minus, lines, idx + 1, eps)
}

/// Sutherland-Hodgman clip of `poly` against `sign·(w·x + b) >= 0`.
fn clip(poly: &[Point], w: [f64; 2], b: f64, sign: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let eval = |p: &Point| sign * (w[0] * p[0] + w[1] * p[1] + b);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let vc = eval(&cur);
        let vn = eval(&next);
        if vc >= 0.0 {
            out.push(cur);
        }
        if (vc > 0.0 && vn < 0.0) || (vc < 0.0 && vn > 0.0) {
            let t = vc / (vc - vn);
            out.push([
                cur[0] + t * (next[0] - cur[0]),
                cur[1] + t * (next[1] - cur[1]),
            ]);
        }
    }
    out
}

fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc.abs() * 0.5
}
