//! Conformal chart of a triaxial ellipsoid from confocal coordinates.
//!
//! With squared semi-axes `a1 < a2 < a3`, a point of the ellipsoid is
//! determined by confocal parameters `λ ∈ (a1, a2)` and `μ ∈ (a2, a3)`:
//!
//! `x_k² = a_k (a_k - λ)(a_k - μ) / Π_{j≠k} (a_k - a_j)`.
//!
//! The induced metric is `(μ - λ)/4 · (λ dλ²/(-Π(a_k - λ)) + μ dμ²/Π(a_k - μ))`,
//! so the reparametrisations `du = √P(λ) dλ`, `dv = √Q(μ) dμ` with
//! `P = λ / (-4 Π(a_k - λ))`, `Q = μ / (4 Π(a_k - μ))` give the conformal
//! metric `(μ - λ)(du² + dv²)`.  The inverse maps `u ↦ λ`, `v ↦ μ` are
//! computed by quadrature and Newton iteration; their derivatives follow
//! from `λ' = P(λ)^{-1/2}`.

use super::quadrature::{gauss_legendre, integrate};
use crate::chart::Jet3;
use crate::linalg::RVec;

#[derive(Clone, Debug)]
pub struct ConfocalEllipsoid {
    /// Squared semi-axes, strictly increasing.
    pub a: [f64; 3],
    lambda: Coordinate,
    mu: Coordinate,
    coeff: [f64; 3],
}

/// One confocal coordinate `t` with density `ρ(t) = t / (s Π(a_k - t))`.
#[derive(Clone, Debug)]
struct Coordinate {
    a: [f64; 3],
    sign: f64,
    t0: f64,
    rule: (Vec<f64>, Vec<f64>),
}

impl Coordinate {
    fn density(&self, t: f64) -> f64 {
        t / (self.sign * self.a.iter().map(|ak| ak - t).product::<f64>())
    }

    /// `ρ'/ρ` and its derivative.
    fn log_derivs(&self, t: f64) -> (f64, f64) {
        let l1 = 1.0 / t + self.a.iter().map(|ak| 1.0 / (ak - t)).sum::<f64>();
        let l2 = -1.0 / (t * t) + self.a.iter().map(|ak| 1.0 / ((ak - t) * (ak - t))).sum::<f64>();
        (l1, l2)
    }

    fn arclength(&self, t: f64) -> f64 {
        integrate(|s| self.density(s).sqrt(), self.t0, t, &self.rule, 0.02)
    }

    /// Inverse of the arclength map.
    fn invert(&self, u: f64) -> f64 {
        let mut t = self.t0 + u / self.density(self.t0).sqrt();
        for _ in 0..60 {
            let step = (self.arclength(t) - u) / self.density(t).sqrt();
            t -= step;
            if step.abs() < 1e-15 * t.abs() {
                break;
            }
        }
        t
    }

    /// `(t, t', t'', t''')` as functions of the arclength parameter.
    fn jet(&self, u: f64) -> [f64; 4] {
        let t = self.invert(u);
        let h = 1.0 / self.density(t).sqrt();
        let (l1, l2) = self.log_derivs(t);
        [t, h, -0.5 * h * h * l1, h.powi(3) * 0.5 * (l1 * l1 - l2)]
    }
}

/// Derivatives of `t ↦ √|a - t|` composed with a 1-jet of `t`.
fn sqrt_factor(a: f64, tj: &[f64; 4]) -> [f64; 4] {
    let [t, t1, t2, t3] = *tj;
    let s = (t - a).signum();
    let r = (a - t).abs();
    let f0 = r.sqrt();
    let f1 = 0.5 * s / f0;
    let f2 = -0.25 / (r * f0);
    let f3 = 0.375 * s / (r * r * f0);
    [f0, f1 * t1, f2 * t1 * t1 + f1 * t2, f3 * t1.powi(3) + 3.0 * f2 * t1 * t2 + f1 * t3]
}

impl ConfocalEllipsoid {
    /// `semi_axes` are the axis lengths (not squared), strictly increasing.
    /// `lambda0`, `mu0` anchor the chart origin.
    pub fn new(semi_axes: [f64; 3], lambda0: f64, mu0: f64) -> Self {
        let a = semi_axes.map(|s| s * s);
        assert!(a[0] < a[1] && a[1] < a[2]);
        assert!(a[0] < lambda0 && lambda0 < a[1] && a[1] < mu0 && mu0 < a[2]);
        let rule = gauss_legendre(12);
        let coeff = std::array::from_fn(|k| {
            let den: f64 = (0..3).filter(|&j| j != k).map(|j| a[k] - a[j]).product();
            (a[k] / den.abs()).sqrt()
        });
        ConfocalEllipsoid {
            a,
            lambda: Coordinate { a, sign: -4.0, t0: lambda0, rule: rule.clone() },
            mu: Coordinate { a, sign: 4.0, t0: mu0, rule },
            coeff,
        }
    }

    /// Chart parameters `(λ, μ)` at `(u, v)`.
    pub fn confocal(&self, p: &[f64]) -> (f64, f64) {
        (self.lambda.invert(p[0]), self.mu.invert(p[1]))
    }

    /// Chart value `(u, v)` of confocal parameters.
    pub fn chart_point(&self, lambda: f64, mu: f64) -> [f64; 2] {
        [self.lambda.arclength(lambda), self.mu.arclength(mu)]
    }

    pub fn eval(&self, p: &[f64]) -> RVec {
        let (l, m) = self.confocal(p);
        RVec::from_fn(3, |k, _| self.coeff[k] * (self.a[k] - l).abs().sqrt() * (self.a[k] - m).abs().sqrt())
    }

    pub fn jet(&self, p: &[f64]) -> Jet3 {
        let lj = self.lambda.jet(p[0]);
        let mj = self.mu.jet(p[1]);
        let fu: Vec<[f64; 4]> = (0..3).map(|k| sqrt_factor(self.a[k], &lj)).collect();
        let fv: Vec<[f64; 4]> = (0..3).map(|k| sqrt_factor(self.a[k], &mj)).collect();
        let entry = |idx: &[usize]| {
            let nv = idx.iter().filter(|&&i| i == 1).count();
            let nu = idx.len() - nv;
            RVec::from_fn(3, |k, _| self.coeff[k] * fu[k][nu] * fv[k][nv])
        };
        Jet3::from_fn(entry(&[]), 2, |i| entry(&[i]), |i, j| entry(&[i, j]), |i, j, k| entry(&[i, j, k]))
    }
}
