//! Rotated second fundamental forms, the structure equations along the
//! rotation, explicit integration of the pluriminimal family, rigid
//! matching and the normal-bundle automorphism `ψ_θ`.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::chart::{ChartedImmersion, Grid, JetMode};
use crate::error::{Error, Result};
use crate::forms::decompose_alpha;
use crate::gauss::isotropy_at;
use crate::kaehler::{curvature_from_gauss, normal_curvature_from_ricci, CurvatureData};
use crate::linalg::{complexify, complexify_vec, numerical_rank, projector, rotation, CMat, CVec, RMat, RVec, C64};
use crate::local::{Form2, Form3, LocalGeometry, Sampled};

/// `{0, π/8, ..., π}`.
pub fn theta_sweep() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * PI / 8.0).collect()
}

/// `α_θ(∂_i, ∂_j) = α(R_θ ∂_i, R_θ ∂_j)`.
pub fn rotate_form(alpha: &Form2<RVec>, j: &RMat, theta: f64) -> Form2<RVec> {
    let r = rotation(j, theta);
    let d = alpha.d;
    Form2::from_fn(d, |x, y| {
        let mut v = RVec::zeros(alpha.get(0, 0).len());
        for a in 0..d {
            for b in 0..d {
                let c = r[(a, x)] * r[(b, y)];
                if c != 0.0 {
                    v += alpha.get(a, b) * c;
                }
            }
        }
        v
    })
}

/// `(D_k α_θ)(∂_i, ∂_j) = (D_k α)(R_θ ∂_i, R_θ ∂_j)`, the rotation being parallel.
pub fn rotate_derivative(dalpha: &Form3<RVec>, j: &RMat, theta: f64) -> Form3<RVec> {
    let r = rotation(j, theta);
    let d = dalpha.d;
    Form3::from_fn(d, |k, x, y| {
        let mut v = RVec::zeros(dalpha.get(0, 0, 0).len());
        for a in 0..d {
            for b in 0..d {
                let c = r[(a, x)] * r[(b, y)];
                if c != 0.0 {
                    v += dalpha.get(k, a, b) * c;
                }
            }
        }
        v
    })
}

/// `α_θ` on every grid point.
#[derive(Clone, Debug)]
pub struct RotatedForm {
    pub theta: f64,
    pub alpha_theta: Vec<Form2<RVec>>,
}

impl RotatedForm {
    pub fn new(s: &Sampled, theta: f64) -> Self {
        RotatedForm { theta, alpha_theta: s.grid.exec.map(&s.points, |lg| rotate_form(&lg.alpha, &lg.j, theta)) }
    }
}

/// `|α_θ - (e^{2iθ} α^(2,0) + α^(1,1) + e^{-2iθ} α^(0,2))|` on the real basis.
pub fn rotation_component_defect(lg: &LocalGeometry, theta: f64) -> f64 {
    let rot = rotate_form(&lg.alpha, &lg.j, theta);
    let (a20, a11, a02) = decompose_alpha(&lg.alpha, &lg.j);
    let e = C64::from_polar(1.0, 2.0 * theta);
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let expect = a20.get(i, j) * e + a11.get(i, j) + a02.get(i, j) * e.conj();
            worst = worst.max((complexify_vec(rot.get(i, j)) - expect).norm());
        }
    }
    worst
}

/// Residuals of the Gauss, Codazzi and Ricci equations with the left-hand
/// sides of `f` and `α` replaced by `α_θ` on the right.
#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct StructureResiduals {
    pub theta: f64,
    pub gauss: f64,
    pub codazzi: f64,
    pub ricci: f64,
}

impl StructureResiduals {
    pub fn max(&self) -> f64 {
        self.gauss.max(self.codazzi).max(self.ricci)
    }
}

pub fn structure_defects_at(lg: &LocalGeometry, curv: &CurvatureData, theta: f64) -> StructureResiduals {
    let d = lg.dim();
    let at = rotate_form(&lg.alpha, &lg.j, theta);
    let r_theta = curvature_from_gauss(&at);
    let gauss = curv.r.iter().zip(&r_theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dat = rotate_derivative(&lg.dalpha, &lg.j, theta);
    let mut codazzi: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                codazzi = codazzi.max((dat.get(i, j, k) - dat.get(j, i, k)).norm());
            }
        }
    }
    let rn_theta = normal_curvature_from_ricci(&at, &lg.metric.g_inv, &curv.normal_frame);
    let ricci = curv.rn.iter().zip(&rn_theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    StructureResiduals { theta, gauss, codazzi, ricci }
}

/// One row per `θ`, each the supremum over the grid.
pub fn structure_equation_residuals(s: &Sampled, thetas: &[f64]) -> Result<Vec<StructureResiduals>> {
    let curv = s.grid.exec.try_map(&s.points, CurvatureData::at)?;
    let idx: Vec<usize> = (0..s.points.len()).collect();
    Ok(thetas
        .iter()
        .map(|&theta| {
            let rows = s.grid.exec.map(&idx, |&i| structure_defects_at(&s.points[i], &curv[i], theta));
            rows.iter().fold(StructureResiduals { theta, ..Default::default() }, |acc, r| StructureResiduals {
                theta,
                gauss: acc.gauss.max(r.gauss),
                codazzi: acc.codazzi.max(r.codazzi),
                ricci: acc.ricci.max(r.ricci),
            })
        })
        .collect())
}

/// `sup |∂_u(df(R_θ ∂_v)) - ∂_v(df(R_θ ∂_u))|`.
pub fn closedness_defect(lg: &LocalGeometry, theta: f64) -> f64 {
    let r = rotation(&lg.j, theta);
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for u in 0..d {
        for v in (u + 1)..d {
            let mut w = RVec::zeros(lg.n());
            for b in 0..d {
                w += lg.jet.d2(u, b) * r[(b, v)] - lg.jet.d2(v, b) * r[(b, u)];
            }
            worst = worst.max(w.norm());
        }
    }
    worst
}

pub fn closedness_residual(s: &Sampled, theta: f64) -> f64 {
    s.sup(|lg| closedness_defect(lg, theta))
}

/// `f_θ` on a grid, integrated from `df_θ = df ∘ R_θ`.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub theta: f64,
    pub shape: Vec<usize>,
    pub values: Vec<RVec>,
    pub basepoint: Vec<usize>,
    pub closedness: f64,
    /// `sup |R_θᵀ g R_θ - g|` at the grid points.
    pub metric_deviation_pointwise: f64,
    /// Induced metric of the integrated values by fourth-order differences
    /// against `g`, over nodes at least two steps from the boundary.
    pub metric_deviation_integrated: f64,
}

impl FamilyMember {
    pub fn metric_deviation(&self) -> f64 {
        self.metric_deviation_pointwise.max(self.metric_deviation_integrated)
    }
}

/// Integrates the closed form `df ∘ R_θ` along row-major staircase paths
/// from `basepoint` (a grid multi-index; the centre node when `None`).
///
/// Each grid edge uses the trapezoid rule with the Euler–Maclaurin end
/// correction `h²/12 (ω'(a) - ω'(b))`, `ω'` coming from the analytic jet.
/// Fails when the closedness residual exceeds `closed_tol`.
pub fn integrate_family(
    s: &Sampled,
    theta: f64,
    basepoint: Option<Vec<usize>>,
    closed_tol: f64,
) -> Result<FamilyMember> {
    let closedness = closedness_residual(s, theta);
    if closedness.is_nan() || closedness > closed_tol {
        return Err(Error::NotClosed { residual: closedness, tolerance: closed_tol });
    }
    let grid = &s.grid;
    let shape = grid.shape();
    let d = shape.len();
    let base = basepoint.unwrap_or_else(|| shape.iter().map(|n| n / 2).collect());
    if base.len() != d || base.iter().zip(&shape).any(|(b, n)| b >= n) {
        return Err(Error::InvalidDims(format!("basepoint {base:?} outside grid {shape:?}")));
    }
    // ω_k and its derivative along axis k at every node
    let omega: Vec<(Vec<RVec>, Vec<RVec>)> = grid.exec.map(&s.points, |lg| {
        let r = rotation(&lg.j, theta);
        let w = (0..d)
            .map(|k| (0..d).fold(RVec::zeros(lg.n()), |acc, b| acc + &lg.jet.d1[b] * r[(b, k)]))
            .collect();
        let dw = (0..d)
            .map(|k| (0..d).fold(RVec::zeros(lg.n()), |acc, b| acc + lg.jet.d2(k, b) * r[(b, k)]))
            .collect();
        (w, dw)
    });
    let segment = |flat: usize, k: usize| -> RVec {
        // from node `flat` to its successor along axis k
        let mut idx = grid.multi_index(flat);
        let a = grid.axes[k][idx[k]];
        idx[k] += 1;
        let next = grid.flat_index(&idx);
        let h = grid.axes[k][idx[k]] - a;
        let (wa, da) = (&omega[flat].0[k], &omega[flat].1[k]);
        let (wb, db) = (&omega[next].0[k], &omega[next].1[k]);
        (wa + wb) * (h / 2.0) + (da - db) * (h * h / 12.0)
    };
    let f0 = s.points[grid.flat_index(&base)].jet.value.clone();
    let values = grid.exec.map_range(grid.len(), |flat| {
        let target = grid.multi_index(flat);
        let mut cur = base.clone();
        let mut acc = f0.clone();
        for k in 0..d {
            while cur[k] < target[k] {
                acc += segment(grid.flat_index(&cur), k);
                cur[k] += 1;
            }
            while cur[k] > target[k] {
                cur[k] -= 1;
                acc -= segment(grid.flat_index(&cur), k);
            }
        }
        acc
    });
    let pointwise = s.sup(|lg| {
        let r = rotation(&lg.j, theta);
        (r.transpose() * &lg.metric.g * &r - &lg.metric.g).amax()
    });
    let integrated = integrated_metric_deviation(grid, &values, s);
    Ok(FamilyMember {
        theta,
        shape,
        values,
        basepoint: base,
        closedness,
        metric_deviation_pointwise: pointwise,
        metric_deviation_integrated: integrated,
    })
}

fn integrated_metric_deviation(grid: &Grid, values: &[RVec], s: &Sampled) -> f64 {
    let shape = grid.shape();
    let d = shape.len();
    if shape.iter().any(|&n| n < 5) {
        return 0.0;
    }
    let interior: Vec<usize> =
        (0..grid.len()).filter(|&f| grid.multi_index(f).iter().zip(&shape).all(|(&i, &n)| i >= 2 && i + 2 < n)).collect();
    let devs = grid.exec.map(&interior, |&flat| {
        let idx = grid.multi_index(flat);
        let deriv: Vec<RVec> = (0..d)
            .map(|k| {
                let at = |o: isize| {
                    let mut j = idx.clone();
                    j[k] = (j[k] as isize + o) as usize;
                    &values[grid.flat_index(&j)]
                };
                let h = grid.spacing(k);
                (at(-2) - at(-1) * 8.0 + at(1) * 8.0 - at(2)) / (12.0 * h)
            })
            .collect();
        let g = &s.points[flat].metric.g;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                worst = worst.max((deriv[a].dot(&deriv[b]) - g[(a, b)]).abs());
            }
        }
        worst
    });
    crate::exec::sup(devs)
}

/// Orthogonal alignment `b ≈ Q a + t`, reflections allowed.
#[derive(Clone, Debug)]
pub struct RigidMatch {
    pub rotation: RMat,
    pub translation: RVec,
    pub rms: f64,
    pub reflection: bool,
}

pub fn rigid_match(a: &[RVec], b: &[RVec]) -> Result<RigidMatch> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::CloudMismatch(format!("{} vs {} points", a.len(), b.len())));
    }
    let n = a[0].len();
    if a.iter().chain(b).any(|v| v.len() != n) {
        return Err(Error::CloudMismatch("mixed ambient dimensions".into()));
    }
    let k = a.len() as f64;
    let ca = a.iter().fold(RVec::zeros(n), |s, v| s + v) / k;
    let cb = b.iter().fold(RVec::zeros(n), |s, v| s + v) / k;
    let am = RMat::from_columns(&a.iter().map(|v| v - &ca).collect::<Vec<_>>());
    let bm = RMat::from_columns(&b.iter().map(|v| v - &cb).collect::<Vec<_>>());
    let (ra, rb) = (numerical_rank(&am, 1e-9), numerical_rank(&bm, 1e-9));
    if ra < 2 || rb < 2 {
        return Err(Error::DegenerateCloud(format!("centred ranks {ra} and {rb}")));
    }
    let m = &bm * am.transpose();
    let svd = m.svd(true, true);
    let q = svd.u.unwrap() * svd.v_t.unwrap();
    let t = &cb - &q * &ca;
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (&q * x + &t - y).norm_squared()).sum();
    let reflection = q.determinant() < 0.0;
    Ok(RigidMatch { rotation: q, translation: t, rms: (sq / k).sqrt(), reflection })
}

/// Gauss maps and second fundamental forms of a matched pair of charts on
/// one grid, `b ≈ Q a + t`, where `b` has `df_b = Q df_a ∘ R_θ`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussLinkage {
    /// `sup |P_b - Q P_a Qᵀ|`
    pub projection: f64,
    /// `sup |∂_k P_b - Q ∂_k P_a Qᵀ|`
    pub projection_derivative: f64,
    /// `sup |Qᵀ α_b(x, y) - α_a(x, R_θ y)|`
    pub alpha: f64,
}

pub fn gauss_linkage(a: &Sampled, b: &Sampled, q: &RMat, theta: f64) -> GaussLinkage {
    let idx: Vec<usize> = (0..a.points.len()).collect();
    let rows = a.grid.exec.map(&idx, |&i| {
        let (la, lb) = (&a.points[i], &b.points[i]);
        let proj = (&lb.tangent_projector - q * &la.tangent_projector * q.transpose()).amax();
        let d = la.dim();
        let dproj = (0..d)
            .map(|k| (&lb.dprojector[k] - q * &la.dprojector[k] * q.transpose()).amax())
            .fold(0.0, f64::max);
        let r = rotation(&la.j, theta);
        let mut al: f64 = 0.0;
        for x in 0..d {
            for y in 0..d {
                let mut expect = RVec::zeros(la.n());
                for c in 0..d {
                    expect += la.alpha.get(x, c) * r[(c, y)];
                }
                al = al.max((q.transpose() * lb.alpha.get(x, y) - expect).amax());
            }
        }
        (proj, dproj, al)
    });
    GaussLinkage {
        projection: crate::exec::sup(rows.iter().map(|r| r.0)),
        projection_derivative: crate::exec::sup(rows.iter().map(|r| r.1)),
        alpha: crate::exec::sup(rows.iter().map(|r| r.2)),
    }
}

/// `ψ_θ` at one point as a complex `n × n` matrix acting on `N^c`.
#[derive(Clone, Debug)]
pub struct NormalAutomorphism {
    pub theta: f64,
    pub psi: CMat,
    pub normal_projector: RMat,
}

impl NormalAutomorphism {
    /// `sup |Im ψ|`; `ψ_θ` commutes with conjugation.
    pub fn reality_defect(&self) -> f64 {
        self.psi.iter().fold(0.0, |a, z| a.max(z.im.abs()))
    }

    /// `|ψ* ψ - Π_N|`.
    pub fn unitarity_defect(&self) -> f64 {
        let q = complexify(&self.normal_projector);
        (self.psi.adjoint() * &self.psi - q).iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    /// `|ψ - Π_N|`.
    pub fn identity_defect(&self) -> f64 {
        let q = complexify(&self.normal_projector);
        (&self.psi - q).iter().fold(0.0, |a, z| a.max(z.norm()))
    }
}

/// `ψ_θ = Π_N + (e^{2iθ} - 1) Π_N' + (e^{-2iθ} - 1) Π_N''`: the identity on
/// `N°` and on the part of `N^c` outside the first normal space.
pub fn build_psi(lg: &LocalGeometry, theta: f64) -> NormalAutomorphism {
    let iso = isotropy_at(lg);
    let n = lg.n();
    let q = complexify(&lg.normal_projector);
    let e = C64::from_polar(1.0, 2.0 * theta);
    let one = C64::new(1.0, 0.0);
    let psi = q + projector(&iso.n1, n) * (e - one) + projector(&iso.n2, n) * (e.conj() - one);
    NormalAutomorphism { theta, psi, normal_projector: lg.normal_projector.clone() }
}

/// `sup |ψ_θ α(∂_i, ∂_j) - α_θ(∂_i, ∂_j)|`.
pub fn eq8_defect(lg: &LocalGeometry, psi: &NormalAutomorphism) -> f64 {
    let rot = rotate_form(&lg.alpha, &lg.j, psi.theta);
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let lhs: CVec = &psi.psi * complexify_vec(lg.alpha.get(i, j));
            worst = worst.max((lhs - complexify_vec(rot.get(i, j))).norm());
        }
    }
    worst
}

/// Eigenvalues of the real part of `ψ` on an orthonormal normal frame.
pub fn psi_spectrum(lg: &LocalGeometry, psi: &NormalAutomorphism) -> Result<Vec<f64>> {
    let frame = crate::kaehler::normal_frame(lg)?;
    let e = RMat::from_columns(&frame);
    let re = psi.psi.map(|z| z.re);
    let m = e.transpose() * re * &e;
    let sym = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Grid summary of `ψ_θ` over the sweep and of `ψ_{π/2}`, `ψ_π`.
#[derive(Clone, Debug, Serialize)]
pub struct PsiReport {
    pub eq8: f64,
    pub unitarity: f64,
    pub reality: f64,
    /// `sup |ψ_π - I|` on `N`.
    pub psi_pi_identity: f64,
    /// `sup |ψ_{π/2} - I|` on `N`.
    pub psi_half_identity: f64,
    /// Spectrum of `ψ_{π/2}` at the first grid point.
    pub half_spectrum: Vec<f64>,
    /// Dimension of the `-1` eigenspace of `ψ_{π/2}` (eigenvalues within
    /// `1e-8` of `-1`), constant over the grid or `None`.
    pub minus_one_dim: Option<usize>,
}

pub fn psi_report(s: &Sampled, thetas: &[f64]) -> Result<PsiReport> {
    let rows = s.grid.exec.try_map(&s.points, |lg| -> Result<(f64, f64, f64, f64, f64, Vec<f64>)> {
        let mut eq8: f64 = 0.0;
        let mut unit: f64 = 0.0;
        let mut real: f64 = 0.0;
        for &t in thetas {
            let psi = build_psi(lg, t);
            eq8 = eq8.max(eq8_defect(lg, &psi));
            unit = unit.max(psi.unitarity_defect());
            real = real.max(psi.reality_defect());
        }
        let pi_id = build_psi(lg, PI).identity_defect();
        let half = build_psi(lg, PI / 2.0);
        let spec = psi_spectrum(lg, &half)?;
        Ok((eq8, unit, real, pi_id, half.identity_defect(), spec))
    })?;
    let dims: Vec<usize> = rows.iter().map(|r| r.5.iter().filter(|&&l| (l + 1.0).abs() < 1e-8).count()).collect();
    let minus_one_dim = if dims.iter().all(|&x| x == dims[0]) { Some(dims[0]) } else { None };
    Ok(PsiReport {
        eq8: crate::exec::sup(rows.iter().map(|r| r.0)),
        unitarity: crate::exec::sup(rows.iter().map(|r| r.1)),
        reality: crate::exec::sup(rows.iter().map(|r| r.2)),
        psi_pi_identity: crate::exec::sup(rows.iter().map(|r| r.3)),
        psi_half_identity: crate::exec::sup(rows.iter().map(|r| r.4)),
        half_spectrum: rows[0].5.clone(),
        minus_one_dim,
    })
}

/// Writes a 2-dimensional member as a triangle mesh: `v x y z` lines (the
/// first three coordinates, full coordinates on a preceding `#` line when
/// the ambient dimension exceeds 3) and 1-based `f i j k` lines.
pub fn write_mesh<W: Write>(member: &FamilyMember, out: &mut W) -> Result<()> {
    if member.shape.len() != 2 {
        return Err(Error::InvalidDims(format!("mesh export needs a 2-dimensional grid, got {:?}", member.shape)));
    }
    let (n0, n1) = (member.shape[0], member.shape[1]);
    writeln!(out, "# theta {}", member.theta)?;
    for v in &member.values {
        if v.len() > 3 {
            let full: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "# {}", full.join(" "))?;
        }
        let c = |i: usize| v.get(i).copied().unwrap_or(0.0);
        writeln!(out, "v {} {} {}", c(0), c(1), c(2))?;
    }
    for i in 0..n0 - 1 {
        for j in 0..n1 - 1 {
            let a = i * n1 + j + 1;
            let b = a + 1;
            let c = a + n1;
            let d = c + 1;
            writeln!(out, "f {a} {b} {d}")?;
            writeln!(out, "f {a} {d} {c}")?;
        }
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[StructureResiduals], out: &mut W) -> Result<()> {
    writeln!(out, "theta,gauss,codazzi,ricci")?;
    for r in rows {
        writeln!(out, "{},{:e},{:e},{:e}", r.theta, r.gauss, r.codazzi, r.ricci)?;
    }
    Ok(())
}

/// Samples `imm` on `grid` with analytic jets.
pub fn sample(imm: &ChartedImmersion, grid: &Grid) -> Result<Sampled> {
    Sampled::new(imm, grid, JetMode::Analytic, crate::chart::DEFAULT_H)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn grid(imm: &ChartedImmersion, n: usize) -> Sampled {
        sample(imm, &Grid::interior(&imm.domain, n)).unwrap()
    }

    #[test]
    fn rotation_identities() {
        let lg = LocalGeometry::at(&fixtures::veronese(), &[0.2, -0.3], JetMode::Analytic, 1e-4).unwrap();
        assert_eq!(rotate_form(&lg.alpha, &lg.j, 0.0), lg.alpha);
        for t in theta_sweep() {
            assert!(rotation_component_defect(&lg, t) < 1e-10);
        }
        let a = rotate_form(&lg.alpha, &lg.j, 0.4);
        let b = rotate_form(&lg.alpha, &lg.j, 0.4 + PI);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).amax() < 1e-12));
        let sph = LocalGeometry::at(&fixtures::sphere(), &[0.2, -0.3], JetMode::Analytic, 1e-4).unwrap();
        let r = rotate_form(&sph.alpha, &sph.j, 1.1);
        assert!(r.iter().zip(sph.alpha.iter()).all(|(x, y)| (x - y).amax() < 1e-12));
    }

    #[test]
    fn structure_equations_examples() {
        let sph = grid(&fixtures::sphere(), 5);
        let rows = structure_equation_residuals(&sph, &[0.0, PI / 3.0]).unwrap();
        assert!(rows.iter().all(|r| r.max() < 1e-8), "{rows:?}");
        let ell = grid(&fixtures::ellipsoid(), 5);
        let rows = structure_equation_residuals(&ell, &[0.0, PI / 4.0]).unwrap();
        assert!(rows[0].max() < 1e-8);
        assert!(rows[1].codazzi > 1e-2);
    }

    #[test]
    fn closedness_examples() {
        let cat = grid(&fixtures::catenoid(), 7);
        assert_eq!(closedness_residual(&cat, 0.0), 0.0);
        assert!(closedness_residual(&cat, PI / 2.0) < 1e-6);
        let sph = grid(&fixtures::sphere(), 7);
        assert!(closedness_residual(&sph, PI / 2.0) > 1e-2);
        assert!(matches!(integrate_family(&sph, PI / 2.0, None, 1e-6), Err(Error::NotClosed { .. })));
    }

    #[test]
    fn zero_angle_reproduces_the_immersion() {
        let cat = grid(&fixtures::catenoid(), 21);
        let m = integrate_family(&cat, 0.0, None, 1e-6).unwrap();
        let dev = m.values.iter().zip(&cat.points).map(|(v, lg)| (v - &lg.jet.value).amax()).fold(0.0, f64::max);
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn procrustes_recovers_motion() {
        let pts: Vec<RVec> =
            (0..20).map(|i| RVec::from_vec(vec![(i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 * 0.1])).collect();
        let same = rigid_match(&pts, &pts).unwrap();
        assert!(same.rms < 1e-13, "{}", same.rms);
        let q = *nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1).matrix();
        let q = RMat::from_iterator(3, 3, q.iter().cloned());
        let mut refl = RMat::identity(3, 3);
        refl[(2, 2)] = -1.0;
        let t = RVec::from_vec(vec![1.0, -2.0, 0.5]);
        let moved: Vec<RVec> = pts.iter().map(|p| &q * &refl * p + &t).collect();
        let m = rigid_match(&pts, &moved).unwrap();
        assert!(m.rms < 1e-12 && m.reflection);
        let line: Vec<RVec> = (0..5).map(|i| RVec::from_vec(vec![i as f64, 0.0, 0.0])).collect();
        assert!(matches!(rigid_match(&line, &line), Err(Error::DegenerateCloud(_))));
    }

    #[test]
    fn psi_on_veronese_and_standard_embedding() {
        let ver = grid(&fixtures::veronese(), 3);
        let rep = psi_report(&ver, &theta_sweep()).unwrap();
        assert!(rep.eq8 < 1e-6 && rep.psi_pi_identity < 1e-12, "{rep:?}");
        assert_eq!(rep.minus_one_dim, Some(2));
        let st = grid(&fixtures::standard_embedding(), 3);
        let rep = psi_report(&st, &theta_sweep()).unwrap();
        assert!(rep.psi_half_identity < 1e-8, "{rep:?}");
    }

    #[test]
    fn mesh_export_counts() {
        let cat = grid(&fixtures::catenoid(), 4);
        let m = integrate_family(&cat, PI / 2.0, None, 1e-6).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 16);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 18);
    }
}
