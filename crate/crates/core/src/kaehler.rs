//! Induced metric, Levi-Civita connection, Kähler verification and the
//! curvature tensors obtained from the Gauss and Ricci equations.

use serde::Serialize;

use crate::chart::{eval_jet, ChartedImmersion, Jet3, JetMode};
use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt_real, max_abs, CMat, CVec, RMat, RVec, C64};
use crate::local::{Form2, LocalGeometry, Sampled};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricData {
    pub g: RMat,
    pub g_inv: RMat,
    /// `Γ^l_ij` stored at `(l * d + i) * d + j`.
    pub christoffel: Vec<f64>,
}

impl MetricData {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn gamma(&self, l: usize, i: usize, j: usize) -> f64 {
        let d = self.dim();
        self.christoffel[(l * d + i) * d + j]
    }
}

/// `g_ij = <d1_i, d1_j>` with Christoffel symbols from the analytic
/// derivative `∂_k g_ij = <d2_ik, d1_j> + <d1_i, d2_jk>`.
pub fn induced_metric(jet: &Jet3) -> Result<MetricData> {
    let d = jet.dim;
    let g = RMat::from_fn(d, d, |i, j| jet.d1[i].dot(&jet.d1[j]));
    let chol = g.clone().cholesky().ok_or(Error::SingularMetric)?;
    let g_inv = chol.inverse();
    let dg = |k: usize, i: usize, j: usize| jet.d2(i, k).dot(&jet.d1[j]) + jet.d1[i].dot(jet.d2(j, k));
    let mut christoffel = vec![0.0; d * d * d];
    for l in 0..d {
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for c in 0..d {
                    s += g_inv[(l, c)] * (dg(i, j, c) + dg(j, i, c) - dg(c, i, j));
                }
                christoffel[(l * d + i) * d + j] = 0.5 * s;
                christoffel[(l * d + j) * d + i] = 0.5 * s;
            }
        }
    }
    Ok(MetricData { g, g_inv, christoffel })
}

/// Christoffel symbols at a chart point, indexed as [`MetricData::gamma`].
pub fn christoffel(imm: &ChartedImmersion, p: &[f64]) -> Result<Vec<f64>> {
    let jet = eval_jet(imm, p, JetMode::Analytic, crate::chart::DEFAULT_H)?;
    Ok(induced_metric(&jet)?.christoffel)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KaehlerResidual {
    /// `sup |Jᵀ g J - g|`
    pub orth: f64,
    /// `sup |∇J|`
    pub parallel: f64,
}

pub fn orthogonality_defect(lg: &LocalGeometry) -> f64 {
    let g = &lg.metric.g;
    max_abs(&(lg.j.transpose() * g * &lg.j - g))
}

/// `(∇_k J)^i_j = Γ^i_kl J^l_j - Γ^l_kj J^i_l` (J has constant entries).
pub fn parallel_defect(lg: &LocalGeometry) -> f64 {
    let d = lg.dim();
    let j = &lg.j;
    let mut worst: f64 = 0.0;
    for k in 0..d {
        for i in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += lg.metric.gamma(i, k, l) * j[(l, c)] - lg.metric.gamma(l, k, c) * j[(i, l)];
                }
                worst = worst.max(s.abs());
            }
        }
    }
    worst
}

pub fn kaehler_residual(s: &Sampled) -> KaehlerResidual {
    KaehlerResidual { orth: s.sup(orthogonality_defect), parallel: s.sup(parallel_defect) }
}

/// Orthonormal frame of the normal space, by Gram–Schmidt over the
/// projected standard basis in fixed order.
pub fn normal_frame(lg: &LocalGeometry) -> Result<Vec<RVec>> {
    let n = lg.n();
    let gens: Vec<RVec> = (0..n).map(|a| lg.normal_projector.column(a).into_owned()).collect();
    let frame = gram_schmidt_real(&gens, 1e-6, 1.0);
    if frame.len() != n - lg.dim() {
        return Err(Error::RankDeficient { rank: n - frame.len(), expected: lg.dim() });
    }
    Ok(frame)
}

/// `<R(∂_i,∂_j)∂_k, ∂_l>` and `<R^N(∂_i,∂_j) ξ_a, ξ_b>` at a point.
#[derive(Clone, Debug)]
pub struct CurvatureData {
    pub d: usize,
    pub r: Vec<f64>,
    pub rn: Vec<f64>,
    pub normal_frame: Vec<RVec>,
}

impl CurvatureData {
    pub fn at(lg: &LocalGeometry) -> Result<Self> {
        let frame = normal_frame(lg)?;
        Ok(CurvatureData {
            d: lg.dim(),
            r: curvature_from_gauss(&lg.alpha),
            rn: normal_curvature_from_ricci(&lg.alpha, &lg.metric.g_inv, &frame),
            normal_frame: frame,
        })
    }

    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.d;
        self.r[((i * d + j) * d + k) * d + l]
    }

    pub fn rn(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        let (d, r) = (self.d, self.normal_frame.len());
        self.rn[((i * d + j) * r + a) * r + b]
    }

    /// Complex-multilinear extension of `R`.
    pub fn r_c(&self, x: &CVec, y: &CVec, u: &CVec, v: &CVec) -> C64 {
        let d = self.d;
        let mut s = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                let xy = x[i] * y[j];
                if xy == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..d {
                    for l in 0..d {
                        s += xy * u[k] * v[l] * self.r(i, j, k, l);
                    }
                }
            }
        }
        s
    }

    /// Matrix of `<R^N(x,y) ξ_a, ξ_b>` over the normal frame.
    pub fn rn_c(&self, x: &CVec, y: &CVec) -> CMat {
        let r = self.normal_frame.len();
        CMat::from_fn(r, r, |a, b| {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..self.d {
                for j in 0..self.d {
                    s += x[i] * y[j] * self.rn(i, j, a, b);
                }
            }
            s
        })
    }

    /// Largest violation of the algebraic symmetries of `R` and `R^N`.
    pub fn symmetry_residual(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let v = self.r(i, j, k, l);
                        worst = worst
                            .max((v + self.r(j, i, k, l)).abs())
                            .max((v + self.r(i, j, l, k)).abs())
                            .max((v - self.r(k, l, i, j)).abs());
                    }
                }
                let r = self.normal_frame.len();
                for a in 0..r {
                    for b in 0..r {
                        let v = self.rn(i, j, a, b);
                        worst = worst.max((v + self.rn(j, i, a, b)).abs()).max((v + self.rn(i, j, b, a)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// `<R(∂_i,∂_j)∂_k,∂_l> = <α_il, α_jk> - <α_ik, α_jl>`.
pub fn curvature_from_gauss(alpha: &Form2<RVec>) -> Vec<f64> {
    let d = alpha.d;
    let mut r = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    r[((i * d + j) * d + k) * d + l] =
                        alpha.get(i, l).dot(alpha.get(j, k)) - alpha.get(i, k).dot(alpha.get(j, l));
                }
            }
        }
    }
    r
}

/// Matrix `S_ξ` with entries `<α_ij, ξ>`; the shape operator is `g⁻¹ S_ξ`.
pub fn shape_matrix(alpha: &Form2<RVec>, xi: &RVec) -> RMat {
    RMat::from_fn(alpha.d, alpha.d, |i, j| alpha.get(i, j).dot(xi))
}

/// `<R^N(∂_i,∂_j) ξ_a, ξ_b> = <[A_a, A_b] ∂_i, ∂_j>` over an orthonormal
/// normal frame.
pub fn normal_curvature_from_ricci(alpha: &Form2<RVec>, g_inv: &RMat, frame: &[RVec]) -> Vec<f64> {
    let d = alpha.d;
    let r = frame.len();
    let s: Vec<RMat> = frame.iter().map(|e| shape_matrix(alpha, e)).collect();
    let mut out = vec![0.0; d * d * r * r];
    for a in 0..r {
        for b in 0..r {
            let c = &s[a] * g_inv * &s[b] - &s[b] * g_inv * &s[a];
            for i in 0..d {
                for j in 0..d {
                    out[((i * d + j) * r + a) * r + b] = c[(j, i)];
                }
            }
        }
    }
    out
}

/// `sup |<R(x,y)u, v>|` over real basis `x, y` and `u, v ∈ T'`.
pub fn kaehler_curvature_residual(lg: &LocalGeometry, curv: &CurvatureData) -> f64 {
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for a in 0..d {
                for b in 0..d {
                    let v = curv.r_c(&lg.basis(i), &lg.basis(j), &lg.holo(a), &lg.holo(b));
                    worst = worst.max(v.norm());
                }
            }
        }
    }
    worst
}

/// `sup |R^N(x', y')|` for `x', y' ∈ T'`.
pub fn normal_curvature_holomorphic_residual(lg: &LocalGeometry, curv: &CurvatureData) -> f64 {
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let m = curv.rn_c(&lg.holo(a), &lg.holo(b));
            worst = worst.max(m.iter().fold(0.0, |acc, z| acc.max(z.norm())));
        }
    }
    worst
}

/// Tangent vector `R(x,y)u` in chart components.
fn curvature_endomorphism(lg: &LocalGeometry, curv: &CurvatureData, x: &CVec, y: &CVec, u: &CVec) -> CVec {
    let d = lg.dim();
    let lowered = CVec::from_fn(d, |c, _| curv.r_c(x, y, u, &lg.basis(c)));
    crate::linalg::complexify(&lg.metric.g_inv) * lowered
}

/// Intertwining of the curvature of `T' ⊗ T''` and of the normal bundle
/// through `β = α^(1,1)`:
/// `R^N(x,y) β(u, v̄) = β(R(x,y)u, v̄) + β(u, R(x,y)v̄)`.
pub fn sublemma_residual(lg: &LocalGeometry, curv: &CurvatureData) -> f64 {
    let d = lg.dim();
    let frame: Vec<CVec> = curv.normal_frame.iter().map(crate::linalg::complexify_vec).collect();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let (x, y) = (lg.basis(i), lg.basis(j));
            let rn = curv.rn_c(&x, &y);
            for a in 0..d {
                for b in 0..d {
                    let (u, vb) = (lg.holo(a), lg.antiholo(b));
                    let beta = lg.alpha_c(&u, &vb);
                    let coords = CVec::from_fn(frame.len(), |c, _| crate::linalg::sym(&beta, &frame[c]));
                    let mut lhs = CVec::zeros(lg.n());
                    for bb in 0..frame.len() {
                        let mut coef = C64::new(0.0, 0.0);
                        for aa in 0..frame.len() {
                            coef += coords[aa] * rn[(aa, bb)];
                        }
                        lhs += &frame[bb] * coef;
                    }
                    let ru = curvature_endomorphism(lg, curv, &x, &y, &u);
                    let rv = curvature_endomorphism(lg, curv, &x, &y, &vb);
                    let rhs = lg.alpha_c(&ru, &vb) + lg.alpha_c(&u, &rv);
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
    }
    worst
}

/// Intrinsic curvature from finite differences of the analytic Christoffel
/// symbols: `R^l_ijk = ∂_iΓ^l_jk - ∂_jΓ^l_ik + Γ^l_im Γ^m_jk - Γ^l_jm Γ^m_ik`,
/// lowered with `g`.  An independent route to [`curvature_from_gauss`].
pub fn curvature_from_metric_fd(imm: &ChartedImmersion, p: &[f64], h: f64) -> Result<Vec<f64>> {
    let jet = eval_jet(imm, p, JetMode::Analytic, h)?;
    let md = induced_metric(&jet)?;
    let d = md.dim();
    let shifted = |k: usize, s: f64| {
        let mut q = p.to_vec();
        q[k] += s;
        christoffel(imm, &q)
    };
    let mut dgamma = Vec::with_capacity(d);
    for k in 0..d {
        let plus = shifted(k, h)?;
        let minus = shifted(k, -h)?;
        dgamma.push(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
    }
    let gam = |l: usize, i: usize, j: usize| md.gamma(l, i, j);
    let dgam = |k: usize, l: usize, i: usize, j: usize| dgamma[k][(l * d + i) * d + j];
    let mut out = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let upper: Vec<f64> = (0..d)
                    .map(|l| {
                        let mut v = dgam(i, l, j, k) - dgam(j, l, i, k);
                        for m in 0..d {
                            v += gam(l, i, m) * gam(m, j, k) - gam(l, j, m) * gam(m, i, k);
                        }
                        v
                    })
                    .collect();
                for l in 0..d {
                    out[((i * d + j) * d + k) * d + l] = (0..d).map(|c| md.g[(l, c)] * upper[c]).sum();
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Grid;
    use crate::fixtures;

    fn lg(imm: &ChartedImmersion, p: &[f64]) -> LocalGeometry {
        LocalGeometry::at(imm, p, JetMode::Analytic, 1e-4).unwrap()
    }

    #[test]
    fn catenoid_christoffel_symbols() {
        let u: f64 = 0.4;
        let gam = christoffel(&fixtures::catenoid(), &[u, 0.3]).unwrap();
        let g = |l: usize, i: usize, j: usize| gam[(l * 2 + i) * 2 + j];
        let t = u.tanh();
        assert!((g(0, 0, 0) - t).abs() < 1e-14);
        assert!((g(0, 1, 1) + t).abs() < 1e-14);
        assert!((g(1, 0, 1) - t).abs() < 1e-14);
        assert!(g(1, 0, 0).abs() < 1e-14 && g(0, 0, 1).abs() < 1e-14);
    }

    #[test]
    fn christoffel_equals_tangential_second_derivative() {
        let imm = fixtures::veronese();
        let l = lg(&imm, &[0.3, -0.4]);
        let df = l.jet.differential();
        for i in 0..2 {
            for j in 0..2 {
                let coords = &l.metric.g_inv * df.transpose() * l.jet.d2(i, j);
                for c in 0..2 {
                    assert!((coords[c] - l.metric.gamma(c, i, j)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn veronese_metric_is_twice_round() {
        let l = lg(&fixtures::veronese(), &[0.2, 0.5]);
        let s = lg(&fixtures::sphere(), &[0.2, 0.5]);
        assert!((&l.metric.g - &s.metric.g * 2.0).amax() < 1e-13);
    }

    #[test]
    fn sphere_has_unit_sectional_curvature() {
        let l = lg(&fixtures::sphere(), &[0.1, 0.6]);
        let c = CurvatureData::at(&l).unwrap();
        let g = &l.metric.g;
        let k = c.r(0, 1, 1, 0) / (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(0, 1)]);
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_curvature_agrees_with_metric_route_on_surfaces() {
        for imm in [fixtures::sphere(), fixtures::catenoid(), fixtures::ellipsoid()] {
            let p = [0.1, 0.2];
            let l = lg(&imm, &p);
            let gauss = curvature_from_gauss(&l.alpha);
            let fd = curvature_from_metric_fd(&imm, &p, 1e-4).unwrap();
            let dev = gauss.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-6, "{}: {dev}", imm.name);
        }
    }

    #[test]
    fn skewed_chart_fails_orthogonality() {
        let imm = fixtures::skewed_plane();
        let s = Sampled::new(&imm, &Grid::interior(&imm.domain, 9), JetMode::Analytic, 1e-4).unwrap();
        let k = kaehler_residual(&s);
        assert!(k.orth > 1e-2);
        assert_eq!(k.parallel, 0.0);
    }

    #[test]
    fn codimension_one_normal_curvature_vanishes() {
        let l = lg(&fixtures::ellipsoid(), &[0.1, -0.2]);
        let c = CurvatureData::at(&l).unwrap();
        assert!(c.rn.iter().all(|v| v.abs() < 1e-15));
        assert!(c.symmetry_residual() < 1e-12);
    }

    #[test]
    fn ricci_equation_matches_normal_connection_curvature() {
        // Normal connection forms from a differentiated normal frame, then
        // R^N = dω + ω ∧ ω, compared with the commutator of shape operators.
        let imm = fixtures::veronese();
        let p = [0.25, -0.15];
        let h = 1e-4;
        let frame_at = |q: &[f64]| normal_frame(&lg(&imm, q)).unwrap();
        // ω_k(a,b) = <∂_k ξ_a, ξ_b>
        let omega_at = |q: &[f64]| -> Vec<RMat> {
            let base = frame_at(q);
            (0..2)
                .map(|k| {
                    let mut a = q.to_vec();
                    let mut b = q.to_vec();
                    a[k] += h;
                    b[k] -= h;
                    let (fa, fb) = (frame_at(&a), frame_at(&b));
                    RMat::from_fn(base.len(), base.len(), |i, j| ((&fa[i] - &fb[i]) / (2.0 * h)).dot(&base[j]))
                })
                .collect()
        };
        let om = omega_at(&p);
        let mut dom = Vec::new();
        for k in 0..2 {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[k] += 1e-3;
            b[k] -= 1e-3;
            let (oa, ob) = (omega_at(&a), omega_at(&b));
            dom.push((0..2).map(|l| (&oa[l] - &ob[l]) / 2e-3).collect::<Vec<_>>());
        }
        // <R^N(∂0,∂1) ξ_a, ξ_b> = ∂_0 ω_1(a,b) - ∂_1 ω_0(a,b) + Σ_c (ω_1(a,c) ω_0(c,b) - ω_0(a,c) ω_1(c,b))
        let l = lg(&imm, &p);
        let c = CurvatureData::at(&l).unwrap();
        let r = om[0].nrows();
        let mut worst: f64 = 0.0;
        for a in 0..r {
            for b in 0..r {
                let mut v = dom[0][1][(a, b)] - dom[1][0][(a, b)];
                for cc in 0..r {
                    v += om[1][(a, cc)] * om[0][(cc, b)] - om[0][(a, cc)] * om[1][(cc, b)];
                }
                worst = worst.max((v - c.rn(0, 1, a, b)).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
        assert!(c.rn.iter().any(|v| v.abs() > 0.1));
    }
}
