//! Stereographic chart of the unit sphere with closed-form jets.
//!
//! `σ(w) = (2w, |w|² - 1) / (1 + |w|²)`; the chart origin maps to the south
//! pole and the metric is `4/(1+|w|²)² |dw|²`, conformal for `J ∂x = ∂y`.

use crate::chart::Jet3;
use crate::linalg::RVec;

pub fn sigma(w: &[f64]) -> RVec {
    let q = 1.0 / (1.0 + w[0] * w[0] + w[1] * w[1]);
    RVec::from_vec(vec![2.0 * w[0] * q, 2.0 * w[1] * q, 1.0 - 2.0 * q])
}

pub fn sigma_jet(w: &[f64]) -> Jet3 {
    let q = 1.0 / (1.0 + w[0] * w[0] + w[1] * w[1]);
    let dl = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let q1 = |i: usize| -2.0 * w[i] * q * q;
    let q2 = |i: usize, j: usize| -2.0 * dl(i, j) * q * q + 8.0 * w[i] * w[j] * q.powi(3);
    let q3 = |i: usize, j: usize, k: usize| {
        8.0 * (dl(i, j) * w[k] + dl(i, k) * w[j] + dl(j, k) * w[i]) * q.powi(3) - 48.0 * w[i] * w[j] * w[k] * q.powi(4)
    };
    // (w_a q) and its derivatives
    let wq1 = |a: usize, i: usize| dl(a, i) * q + w[a] * q1(i);
    let wq2 = |a: usize, i: usize, j: usize| dl(a, i) * q1(j) + dl(a, j) * q1(i) + w[a] * q2(i, j);
    let wq3 = |a: usize, i: usize, j: usize, k: usize| {
        dl(a, i) * q2(j, k) + dl(a, j) * q2(i, k) + dl(a, k) * q2(i, j) + w[a] * q3(i, j, k)
    };
    Jet3::from_fn(
        sigma(w),
        2,
        |i| RVec::from_vec(vec![2.0 * wq1(0, i), 2.0 * wq1(1, i), -2.0 * q1(i)]),
        |i, j| RVec::from_vec(vec![2.0 * wq2(0, i, j), 2.0 * wq2(1, i, j), -2.0 * q2(i, j)]),
        |i, j, k| RVec::from_vec(vec![2.0 * wq3(0, i, j, k), 2.0 * wq3(1, i, j, k), -2.0 * q3(i, j, k)]),
    )
}

/// Applies a linear map `R^3 → R^k` to every entry of a jet.
pub fn map_linear(jet: &Jet3, f: impl Fn(&RVec) -> RVec) -> Jet3 {
    Jet3::from_fn(f(&jet.value), jet.dim, |i| f(&jet.d1[i]), |i, j| f(jet.d2(i, j)), |i, j, k| f(jet.d3(i, j, k)))
}

/// `x yᵀ` flattened row-major.
pub fn outer_flat(x: &RVec, y: &RVec) -> RVec {
    let (a, b) = (x.len(), y.len());
    RVec::from_fn(a * b, |r, _| x[r / b] * y[r % b])
}

/// Skew matrix `x̂` with `x̂ v = x × v`, flattened row-major.
pub fn hat_flat(x: &RVec) -> RVec {
    RVec::from_vec(vec![0.0, -x[2], x[1], x[2], 0.0, -x[0], -x[1], x[0], 0.0])
}
