//! The second fundamental form, its type decomposition, covariant
//! derivatives, mean curvature and the residuals that define the cmc, ppmc
//! and pluriminimal classes.

use serde::Serialize;

use crate::chart::{eval_jet, ChartedImmersion, Jet3, JetMode};
use crate::error::{Error, Result};
use crate::kaehler::{shape_matrix, MetricData};
use crate::linalg::{complexify, complexify_vec, max_abs, CMat, CVec, RMat, RVec, C64};
use crate::local::{Form2, Form3, LocalGeometry, Sampled};

/// `α(∂_i, ∂_j) = (d2_ij)^N`.
pub fn second_fundamental_form(jet: &Jet3, metric: &MetricData) -> Form2<RVec> {
    let df = jet.differential();
    let p = &df * &metric.g_inv * df.transpose();
    let q = RMat::identity(jet.n(), jet.n()) - p;
    Form2::from_fn(jet.dim, |i, j| &q * jet.d2(i, j))
}

/// `(α^(2,0), α^(1,1), α^(0,2))` on the real chart basis:
/// `α^(2,0)(x,y) = α(π'x, π'y)`, `α^(1,1)(x,y) = α(π'x, π''y) + α(π''x, π'y)`.
pub fn decompose_alpha(alpha: &Form2<RVec>, j: &RMat) -> (Form2<CVec>, Form2<CVec>, Form2<CVec>) {
    let d = alpha.d;
    let n = alpha.get(0, 0).len();
    let jc = complexify(j);
    let half = C64::new(0.5, 0.0);
    let i = C64::new(0.0, 1.0);
    let id = CMat::identity(d, d);
    let p1 = (&id - &jc * i) * half;
    let p2 = (&id + &jc * i) * half;
    let eval = |u: CVec, v: CVec| {
        let mut out = CVec::zeros(n);
        for a in 0..d {
            for b in 0..d {
                let c = u[a] * v[b];
                if c != C64::new(0.0, 0.0) {
                    out += complexify_vec(alpha.get(a, b)) * c;
                }
            }
        }
        out
    };
    let col = |m: &CMat, k: usize| m.column(k).into_owned();
    let a20 = Form2::from_fn(d, |x, y| eval(col(&p1, x), col(&p1, y)));
    let a11 = Form2::from_fn(d, |x, y| eval(col(&p1, x), col(&p2, y)) + eval(col(&p2, x), col(&p1, y)));
    let a02 = Form2::from_fn(d, |x, y| eval(col(&p2, x), col(&p2, y)));
    (a20, a11, a02)
}

/// Coordinate components of `α`, its `(p,q)` parts and `Dα`.
#[derive(Clone, Debug)]
pub struct FormTensor {
    pub alpha: Form2<RVec>,
    pub alpha20: Form2<CVec>,
    pub alpha11: Form2<CVec>,
    pub alpha02: Form2<CVec>,
    pub dalpha: Form3<RVec>,
}

impl FormTensor {
    pub fn new(lg: &LocalGeometry) -> Self {
        let (alpha20, alpha11, alpha02) = decompose_alpha(&lg.alpha, &lg.j);
        FormTensor { alpha: lg.alpha.clone(), alpha20, alpha11, alpha02, dalpha: lg.dalpha.clone() }
    }
}

pub fn covariant_derivative_alpha(imm: &ChartedImmersion, p: &[f64]) -> Result<Form3<RVec>> {
    Ok(LocalGeometry::at(imm, p, JetMode::Analytic, crate::chart::DEFAULT_H)?.dalpha)
}

/// `(D_k α^(1,1))(∂_i, ∂_j) = ½((D_k α)(∂_i,∂_j) + (D_k α)(J∂_i, J∂_j))`.
pub fn dalpha11(lg: &LocalGeometry, k: usize, i: usize, j: usize) -> RVec {
    let d = lg.dim();
    let ji = lg.j.column(i);
    let jj = lg.j.column(j);
    let mut v = lg.dalpha.get(k, i, j).clone();
    for a in 0..d {
        for b in 0..d {
            let c = ji[a] * jj[b];
            if c != 0.0 {
                v += lg.dalpha.get(k, a, b) * c;
            }
        }
    }
    v * 0.5
}

pub fn ppmc_defect(lg: &LocalGeometry) -> f64 {
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                worst = worst.max(dalpha11(lg, k, i, j).norm());
            }
        }
    }
    worst
}

/// `sup ‖D α^(1,1)‖` over the grid and all index triples.
pub fn ppmc_residual(s: &Sampled) -> f64 {
    s.sup(ppmc_defect)
}

pub fn codazzi_defect(lg: &LocalGeometry) -> f64 {
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                worst = worst.max((lg.dalpha.get(i, j, k) - lg.dalpha.get(j, i, k)).norm());
            }
        }
    }
    worst
}

/// `sup ‖(D_i α)(j,k) - (D_j α)(i,k)‖`.
pub fn codazzi_residual(s: &Sampled) -> f64 {
    s.sup(codazzi_defect)
}

/// `sup |<α_ij, d1_k>|`.
pub fn normal_valuedness_defect(lg: &LocalGeometry) -> f64 {
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                worst = worst.max(lg.alpha.get(i, j).dot(&lg.jet.d1[k]).abs());
            }
        }
    }
    worst
}

/// `α^(1,1)(x,y) - ½(α(x,y) + α(Jx,Jy))` on the real basis, together with
/// `α^(0,2) - conj(α^(2,0))` and the reconstruction `α^(2,0)+α^(1,1)+α^(0,2) - α`.
pub fn decomposition_defect(lg: &LocalGeometry) -> f64 {
    let ft = FormTensor::new(lg);
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let ji = lg.j.column(i).into_owned();
            let jj = lg.j.column(j).into_owned();
            let mut ajj = RVec::zeros(lg.n());
            for a in 0..d {
                for b in 0..d {
                    ajj += lg.alpha.get(a, b) * (ji[a] * jj[b]);
                }
            }
            let eq2 = complexify_vec(&((lg.alpha.get(i, j) + ajj) * 0.5));
            worst = worst.max((ft.alpha11.get(i, j) - eq2).norm());
            worst = worst.max((ft.alpha02.get(i, j) - ft.alpha20.get(i, j).map(|z| z.conj())).norm());
            let sum = ft.alpha20.get(i, j) + ft.alpha11.get(i, j) + ft.alpha02.get(i, j);
            worst = worst.max((sum - complexify_vec(lg.alpha.get(i, j))).norm());
        }
    }
    worst
}

/// Surfaces only: `α^(1,1)(x,y) = <x,y> η`.
pub fn surface_identity_defect(lg: &LocalGeometry) -> f64 {
    let (a20, a11, _) = decompose_alpha(&lg.alpha, &lg.j);
    let _ = a20;
    let eta = mean_curvature_vector(lg);
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expect = complexify_vec(&(&eta * lg.metric.g[(i, j)]));
            worst = worst.max((a11.get(i, j) - expect).norm());
        }
    }
    worst
}

/// `η = (1/2m) trace_g α`.
pub fn mean_curvature_vector(lg: &LocalGeometry) -> RVec {
    let d = lg.dim();
    let mut eta = RVec::zeros(lg.n());
    for i in 0..d {
        for j in 0..d {
            eta += lg.alpha.get(i, j) * lg.metric.g_inv[(i, j)];
        }
    }
    eta / d as f64
}

/// Shape operator `A_ξ = g⁻¹ S_ξ`; rejects `ξ` with a tangential part above
/// `1e-9` (relative to `|ξ|`).
pub fn shape_operator(lg: &LocalGeometry, xi: &RVec) -> Result<RMat> {
    let tangential = (&lg.tangent_projector * xi).norm();
    if tangential > 1e-9 * xi.norm().max(1.0) {
        return Err(Error::NonNormal { deviation: tangential });
    }
    Ok(&lg.metric.g_inv * shape_matrix(&lg.alpha, xi))
}

/// Pointwise mean curvature data and sphere reduction.
#[derive(Clone, Debug, Serialize)]
pub struct MeanCurvaturePoint {
    pub eta: Vec<f64>,
    pub a_eta: Vec<Vec<f64>>,
    pub kappa: f64,
    /// `max |A_η - κ I|`
    pub off_identity: f64,
    /// `f + η/κ`, when `κ ≠ 0`.
    pub center: Option<Vec<f64>>,
}

pub fn mean_curvature_at(lg: &LocalGeometry) -> MeanCurvaturePoint {
    let eta = mean_curvature_vector(lg);
    let d = lg.dim();
    let a = &lg.metric.g_inv * shape_matrix(&lg.alpha, &eta);
    let kappa = a.trace() / d as f64;
    let off = max_abs(&(&a - RMat::identity(d, d) * kappa));
    let center = if kappa.abs() > 1e-12 { Some((&lg.jet.value + &eta / kappa).iter().cloned().collect()) } else { None };
    MeanCurvaturePoint {
        eta: eta.iter().cloned().collect(),
        a_eta: (0..d).map(|i| a.row(i).iter().cloned().collect()).collect(),
        kappa,
        off_identity: off,
        center,
    }
}

/// Grid summary of the mean curvature and of the sphere reduction
/// `m = f + η/κ`.
#[derive(Clone, Debug, Serialize)]
pub struct MeanCurvatureData {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub eta_norm_max: f64,
    /// `sup |A_η - κ I|`
    pub off_identity: f64,
    /// Centre at the first grid point.
    pub center: Option<Vec<f64>>,
    /// `sup |m(p) - m(p0)|`
    pub center_spread: Option<f64>,
    /// `|η|/κ`, the distance from the centre.
    pub radius: Option<f64>,
    /// `sup | |f - m| - radius |`
    pub radius_spread: Option<f64>,
    pub minimal_in_sphere: bool,
    pub warnings: Vec<String>,
}

pub fn mean_curvature_and_sphere_reduction(s: &Sampled, tol: f64) -> MeanCurvatureData {
    let pts = s.grid.exec.map(&s.points, mean_curvature_at);
    let kappa_min = pts.iter().map(|p| p.kappa).fold(f64::INFINITY, f64::min);
    let kappa_max = pts.iter().map(|p| p.kappa).fold(f64::NEG_INFINITY, f64::max);
    let eta_norm_max = pts.iter().map(|p| p.eta.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let off_identity = pts.iter().map(|p| p.off_identity).fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if kappa_min.abs() > tol && off_identity > tol {
        warnings.push(format!(
            "A_eta has distinct eigenvalues (off-identity {off_identity:.3e}); the immersion decomposes along its eigenspaces"
        ));
    }
    let centers: Option<Vec<RVec>> = pts.iter().map(|p| p.center.as_ref().map(|c| RVec::from_vec(c.clone()))).collect();
    let (center, center_spread, radius, radius_spread) = match (&centers, kappa_min.abs() > tol) {
        (Some(cs), true) if !cs.is_empty() => {
            let c0 = cs[0].clone();
            let spread = cs.iter().map(|c| (c - &c0).norm()).fold(0.0, f64::max);
            let radii: Vec<f64> = s.points.iter().map(|lg| (&lg.jet.value - &c0).norm()).collect();
            let r0 = {
                let p = &pts[0];
                p.eta.iter().map(|x| x * x).sum::<f64>().sqrt() / p.kappa
            };
            let rspread = radii.iter().map(|r| (r - r0).abs()).fold(0.0, f64::max);
            (Some(c0.iter().cloned().collect()), Some(spread), Some(r0), Some(rspread))
        }
        _ => (None, None, None, None),
    };
    let minimal_in_sphere = kappa_min > tol && off_identity < tol && center_spread.is_some_and(|c| c < tol);
    MeanCurvatureData {
        kappa_min,
        kappa_max,
        eta_norm_max,
        off_identity,
        center,
        center_spread,
        radius,
        radius_spread,
        minimal_in_sphere,
        warnings,
    }
}

/// Cross-factor identities on a Riemannian product chart whose first factor
/// occupies the first `split` real directions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProductIdentity {
    /// `sup | |α(π'x1, π''x2)| - |α(π'x1, π'x2)| |` over real cross pairs.
    pub mixed_vs_pure: f64,
    /// `sup | |α(y1, ȳ2)| - |α(y1, y2)| |` over complex cross pairs.
    pub gauss_step: f64,
    /// `sup | |α(π'x1, π''x2) + α(π''x1, π'x2)| - |α(π'x1, π'x2)| |`, the
    /// same comparison with the summed mixed part.
    pub summed_mixed_vs_pure: f64,
    /// Largest `|α(x1, x2)|` seen, to tell trivial from non-trivial cases.
    pub cross_scale: f64,
}

/// Evaluates the product identity on `pairs` seeded random cross pairs at
/// every sampled point.
pub fn product_identity(s: &Sampled, split: usize, pairs: usize, seed: u64) -> ProductIdentity {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    let d = s.points[0].dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let mut x1 = CVec::zeros(d);
        let mut x2 = CVec::zeros(d);
        let mut y1 = CVec::zeros(d);
        let mut y2 = CVec::zeros(d);
        for a in 0..d {
            let (r1, r2): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (i1, i2): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if a < split {
                x1[a] = C64::new(r1, 0.0);
                y1[a] = C64::new(r2, i1);
            } else {
                x2[a] = C64::new(r1, 0.0);
                y2[a] = C64::new(r2, i2);
            }
        }
        draws.push((x1, x2, y1, y2));
    }
    let per_point = s.grid.exec.map(&s.points, |lg| {
        let p1 = complexify(&RMat::identity(d, d)) * C64::new(0.5, 0.0) - complexify(&lg.j) * C64::new(0.0, 0.5);
        let p2 = p1.map(|z| z.conj());
        let mut mixed: f64 = 0.0;
        let mut gauss: f64 = 0.0;
        let mut summed: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (x1, x2, y1, y2) in &draws {
            let a_mixed = lg.alpha_c(&(&p1 * x1), &(&p2 * x2)).norm();
            let a_pure = lg.alpha_c(&(&p1 * x1), &(&p1 * x2)).norm();
            mixed = mixed.max((a_mixed - a_pure).abs());
            let a_summed = (lg.alpha_c(&(&p1 * x1), &(&p2 * x2)) + lg.alpha_c(&(&p2 * x1), &(&p1 * x2))).norm();
            summed = summed.max((a_summed - a_pure).abs());
            let g1 = lg.alpha_c(y1, &y2.map(|z| z.conj())).norm();
            let g2 = lg.alpha_c(y1, y2).norm();
            gauss = gauss.max((g1 - g2).abs());
            scale = scale.max(lg.alpha_c(x1, x2).norm());
        }
        (mixed, gauss, summed, scale)
    });
    let fold = |f: fn(&(f64, f64, f64, f64)) -> f64| per_point.iter().map(f).fold(0.0, f64::max);
    ProductIdentity {
        mixed_vs_pure: fold(|t| t.0),
        gauss_step: fold(|t| t.1),
        summed_mixed_vs_pure: fold(|t| t.2),
        cross_scale: fold(|t| t.3),
    }
}

/// Numerical rank of `ker α^(1,1)` as a subspace of the real tangent space.
pub fn alpha11_kernel_rank(lg: &LocalGeometry, tol: f64) -> usize {
    let (_, a11, _) = decompose_alpha(&lg.alpha, &lg.j);
    let d = lg.dim();
    let n = lg.n();
    // rows: (j, ambient component) pairs, columns: x; entries Re α^(1,1)(x, ∂_j)
    let m = RMat::from_fn(d * n, d, |r, x| a11.get(x, r / n)[r % n].re);
    let sv = m.svd(false, false).singular_values;
    d - sv.iter().filter(|&&s| s > tol).count()
}

pub fn eval_form_tensor(imm: &ChartedImmersion, p: &[f64]) -> Result<FormTensor> {
    let jet = eval_jet(imm, p, JetMode::Analytic, crate::chart::DEFAULT_H)?;
    Ok(FormTensor::new(&LocalGeometry::from_jet(p.to_vec(), jet)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Grid;
    use crate::fixtures;

    fn sample(imm: &ChartedImmersion) -> Sampled {
        Sampled::new(imm, &Grid::interior(&imm.domain, 9), JetMode::Analytic, 1e-4).unwrap()
    }

    #[test]
    fn sphere_alpha20_vanishes_and_curve_alpha11_vanishes() {
        let s = eval_form_tensor(&fixtures::sphere(), &[0.2, 0.3]).unwrap();
        assert!(s.alpha20.iter().all(|v| v.norm() < 1e-14));
        let h = eval_form_tensor(&fixtures::holomorphic_curve(), &[0.2, 0.3]).unwrap();
        assert!(h.alpha11.iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn catenoid_principal_curvatures_at_origin() {
        let lg = LocalGeometry::at(&fixtures::catenoid(), &[0.0, 0.0], JetMode::Analytic, 1e-4).unwrap();
        let nu = RVec::from_vec(vec![1.0, 0.0, 0.0]);
        let a = shape_operator(&lg, &nu).unwrap();
        let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn catenoid_shape_operator_away_from_origin() {
        let u: f64 = 0.5;
        let lg = LocalGeometry::at(&fixtures::catenoid(), &[u, 0.2], JetMode::Analytic, 1e-4).unwrap();
        let nu = lg.normal_projector.column(0).into_owned();
        let nu = &nu / nu.norm();
        let a = shape_operator(&lg, &nu).unwrap();
        let ev = a.symmetric_eigenvalues();
        let k = 1.0 / u.cosh().powi(2);
        assert!(ev.iter().all(|e| (e.abs() - k).abs() < 1e-13));
    }

    #[test]
    fn sphere_shape_operator_and_rejection() {
        let lg = LocalGeometry::at(&fixtures::sphere(), &[0.4, -0.1], JetMode::Analytic, 1e-4).unwrap();
        let a = shape_operator(&lg, &(-&lg.jet.value)).unwrap();
        assert!((a - RMat::identity(2, 2)).amax() < 1e-13);
        let tangent = lg.jet.d1[0].clone();
        assert!(matches!(shape_operator(&lg, &tangent), Err(Error::NonNormal { .. })));
    }

    #[test]
    fn identities_hold_on_every_fixture() {
        for r in fixtures::registry() {
            let s = sample(&r.immersion);
            let nv = s.sup(normal_valuedness_defect);
            let dec = s.sup(decomposition_defect);
            let cod = codazzi_residual(&s);
            assert!(nv < 1e-9, "{} normal {nv}", r.name);
            assert!(dec < 1e-10, "{} decomposition {dec}", r.name);
            assert!(cod < 1e-6, "{} codazzi {cod}", r.name);
            if r.immersion.complex_dim == 1 {
                let si = s.sup(surface_identity_defect);
                assert!(si < 1e-9, "{} surface {si}", r.name);
            }
        }
    }

    #[test]
    fn ellipsoid_is_not_parallel() {
        let s = sample(&fixtures::ellipsoid());
        assert!(s.sup(|lg| lg.dalpha.iter().map(|v| v.norm()).fold(0.0, f64::max)) > 1e-2);
        assert!(ppmc_residual(&s) > 1e-2);
    }

    #[test]
    fn sphere_reduction_values() {
        let s = sample(&fixtures::sphere());
        let mc = mean_curvature_and_sphere_reduction(&s, 1e-8);
        assert!((mc.kappa_min - 1.0).abs() < 1e-12 && (mc.kappa_max - 1.0).abs() < 1e-12);
        assert!(mc.center.unwrap().iter().all(|x| x.abs() < 1e-12));
        assert!((mc.radius.unwrap() - 1.0).abs() < 1e-12);
        assert!(mc.minimal_in_sphere);

        let plane = sample(&fixtures::plane());
        let mp = mean_curvature_and_sphere_reduction(&plane, 1e-8);
        assert_eq!(mp.eta_norm_max, 0.0);
        assert!(!mp.minimal_in_sphere && mp.center.is_none());

        let cyl = sample(&fixtures::cylinder());
        let mcyl = mean_curvature_and_sphere_reduction(&cyl, 1e-8);
        assert!(!mcyl.minimal_in_sphere);
        assert_eq!(mcyl.warnings.len(), 1);
    }

    #[test]
    fn product_identity_on_product_fixtures() {
        for r in fixtures::registry().into_iter().filter(|r| r.product_split.is_some()) {
            let s = Sampled::new(&r.immersion, &Grid::interior(&r.immersion.domain, 3), JetMode::Analytic, 1e-4).unwrap();
            let pi = product_identity(&s, r.product_split.unwrap(), 50, 7);
            eprintln!("{} {:?}", r.name, pi);
            assert!(pi.mixed_vs_pure < 1e-9 && pi.gauss_step < 1e-9, "{}", r.name);
        }
    }
}
