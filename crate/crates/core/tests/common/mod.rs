//! Closed-form oracles for the map `q = x + y` on boxes in the unit square.

#![allow(dead_code)]

fn ramp(t: f64) -> f64 {
    let t = t.max(0.0);
    0.5 * t * t
}

/// Area of `{x + y < s}` inside `[a1, b1] x [a2, b2]`.
pub fn area_below(s: f64, lower: [f64; 2], upper: [f64; 2]) -> f64 {
    let [a1, a2] = lower;
    let [b1, b2] = upper;
    ramp(s - a1 - a2) - ramp(s - b1 - a2) - ramp(s - a1 - b2) + ramp(s - b1 - b2)
}

/// Exact `P(A)` on the unit square for a box `A` and a simple-function density
/// with bin `edges` on `q` and bin probabilities `p`.
pub fn slab_probability(edges: &[f64], p: &[f64], lower: [f64; 2], upper: [f64; 2]) -> f64 {
    let lo = [lower[0].max(0.0), lower[1].max(0.0)];
    let hi = [upper[0].min(1.0), upper[1].min(1.0)];
    let mut total = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        let slab = area_below(edges[i + 1], [0.0, 0.0], [1.0, 1.0]) - area_below(edges[i], [0.0, 0.0], [1.0, 1.0]);
        if slab <= 0.0 {
            continue;
        }
        let inside = area_below(edges[i + 1], lo, hi) - area_below(edges[i], lo, hi);
        total += pi * inside / slab;
    }
    total
}

/// Largest absolute entry difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
