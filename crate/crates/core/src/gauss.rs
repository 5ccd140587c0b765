//! Real Gauss map as projection matrices, the complex Gauss map and its
//! flag lift, and the pluriharmonicity, holomorphicity and isotropy
//! residuals built on them.

use serde::Serialize;

use crate::chart::{check_rank, eval_jet, ChartedImmersion, Grid, Jet3, JetMode};
use crate::error::{Error, Result};
use crate::forms::{decompose_alpha, MeanCurvatureData};
use crate::kaehler::normal_frame;
use crate::linalg::{
    complexify, complexify_vec, conj_vec, frame_matrix, gram_schmidt, herm, max_abs, projector, sym, CMat, CVec,
    RMat, C64,
};
use crate::local::{LocalGeometry, Sampled};

/// Tangent space at a point, stored as the orthogonal projection onto it.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannPoint {
    pub p: RMat,
}

impl GrassmannPoint {
    /// `max(|P² - P|, |Pᵀ - P|, |tr P - dim|)`.
    pub fn defect(&self, dim: usize) -> f64 {
        let p = &self.p;
        max_abs(&(p * p - p)).max(max_abs(&(p.transpose() - p))).max((p.trace() - dim as f64).abs())
    }
}

pub fn gauss_projection(jet: &Jet3) -> Result<GrassmannPoint> {
    check_rank(jet)?;
    let df = jet.differential();
    let g = df.transpose() * &df;
    let gi = g.try_inverse().ok_or(Error::SingularMetric)?;
    Ok(GrassmannPoint { p: &df * gi * df.transpose() })
}

/// `sup_ij |(∂_i P) d1_j - α_ij|` with `∂_i P` from central differences of
/// the projection at `p ± h e_i`.
pub fn dgauss_check(imm: &ChartedImmersion, p: &[f64], h: f64) -> Result<f64> {
    let lg = LocalGeometry::at(imm, p, JetMode::Analytic, crate::chart::DEFAULT_H)?;
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[i] += h;
        b[i] -= h;
        let pa = gauss_projection(&eval_jet(imm, &a, JetMode::Analytic, h)?)?.p;
        let pb = gauss_projection(&eval_jet(imm, &b, JetMode::Analytic, h)?)?.p;
        let dp = (pa - pb) / (2.0 * h);
        for j in 0..d {
            worst = worst.max((&dp * &lg.jet.d1[j] - lg.alpha.get(i, j)).amax());
        }
    }
    Ok(worst)
}

pub fn dgauss_residual(imm: &ChartedImmersion, grid: &Grid, h: f64) -> Result<f64> {
    let pts = grid.points();
    let vals = grid.exec.try_map(&pts, |p| dgauss_check(imm, p, h))?;
    Ok(crate::exec::sup(vals))
}

/// Levi form of the Gauss map through `(D_w α)(π'∂_a, π''∂_b)`.
pub fn gauss_levi_defect(lg: &LocalGeometry) -> f64 {
    let d = lg.dim();
    let mut worst: f64 = 0.0;
    for w in 0..d {
        let bw = lg.basis(w);
        for a in 0..d {
            for b in 0..d {
                worst = worst.max(lg.dalpha_c(&bw, &lg.holo(a), &lg.antiholo(b)).norm());
            }
        }
    }
    worst
}

pub fn gauss_levi_residual(s: &Sampled) -> f64 {
    s.sup(gauss_levi_defect)
}

/// Finite-difference oracle for the Hessian of the Gauss map:
/// `(I - P)(∂_i∂_j P - Σ_l Γ^l_ij ∂_l P) d1_w` against `(D_i α)(∂_j, ∂_w)`.
/// Second differences of `P` use step `h`.
pub fn gauss_hessian_fd_defect(imm: &ChartedImmersion, p: &[f64], h: f64) -> Result<f64> {
    let lg = LocalGeometry::at(imm, p, JetMode::Analytic, crate::chart::DEFAULT_H)?;
    let d = lg.dim();
    let proj = |q: &[f64]| -> Result<RMat> { Ok(gauss_projection(&eval_jet(imm, q, JetMode::Analytic, h)?)?.p) };
    let shifted = |i: usize, si: f64, j: usize, sj: f64| -> Result<RMat> {
        let mut q = p.to_vec();
        q[i] += si * h;
        q[j] += sj * h;
        proj(&q)
    };
    let p0 = lg.tangent_projector.clone();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let hess = if i == j {
                (shifted(i, 1.0, i, 0.0)? - &p0 * 2.0 + shifted(i, -1.0, i, 0.0)?) / (h * h)
            } else {
                (shifted(i, 1.0, j, 1.0)? - shifted(i, 1.0, j, -1.0)? - shifted(i, -1.0, j, 1.0)?
                    + shifted(i, -1.0, j, -1.0)?)
                    / (4.0 * h * h)
            };
            let mut cov = hess;
            for l in 0..d {
                cov -= &lg.dprojector[l] * lg.metric.gamma(l, i, j);
            }
            let cov = &lg.normal_projector * cov;
            for w in 0..d {
                let lhs = &cov * &lg.jet.d1[w];
                worst = worst.max((&lhs - lg.dalpha.get(i, j, w)).amax());
                worst = worst.max((&lhs - lg.dalpha.get(j, i, w)).amax());
            }
        }
    }
    Ok(worst)
}

/// Frames for `(τ', N, τ'')` as columns in `C^n`.
#[derive(Clone, Debug)]
pub struct FlagPoint {
    pub tau1: CMat,
    pub normal: CMat,
    pub tau2: CMat,
}

impl FlagPoint {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.tau1.ncols(), self.normal.ncols(), self.tau2.ncols())
    }

    /// Largest Hermitian cross product between the three legs and largest
    /// deviation from orthonormality inside each leg.
    pub fn orthogonality_defect(&self) -> f64 {
        let all = {
            let mut cols: Vec<CVec> = Vec::new();
            for m in [&self.tau1, &self.normal, &self.tau2] {
                cols.extend(m.column_iter().map(|c| c.into_owned()));
            }
            frame_matrix(&cols, self.tau1.nrows())
        };
        let gram = all.adjoint() * &all;
        let id = CMat::identity(gram.nrows(), gram.ncols());
        (gram - id).iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    /// `max |Σ u_j v_j|` over pairs of `τ'` frame vectors.
    pub fn isotropy_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in self.tau1.column_iter() {
            for b in self.tau1.column_iter() {
                worst = worst.max(sym(&a.into_owned(), &b.into_owned()).norm());
            }
        }
        worst
    }

    pub fn conjugation_defect(&self) -> f64 {
        (&self.tau2 - self.tau1.map(|z| z.conj())).iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    /// Frames as `[re, im]` entry pairs, column-major, for the report.
    pub fn export(&self) -> FlagExport {
        let f = |m: &CMat| -> Vec<Vec<[f64; 2]>> {
            m.column_iter().map(|c| c.iter().map(|z| [z.re, z.im]).collect()).collect()
        };
        FlagExport { tau1: f(&self.tau1), normal: f(&self.normal), tau2: f(&self.tau2) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagExport {
    pub tau1: Vec<Vec<[f64; 2]>>,
    pub normal: Vec<Vec<[f64; 2]>>,
    pub tau2: Vec<Vec<[f64; 2]>>,
}

/// Unnormalised generators `df(π'∂_{x_k})` of `τ'`, one per complex direction.
pub fn tau1_generators(lg: &LocalGeometry) -> CMat {
    let m = lg.dim() / 2;
    let cols: Vec<CVec> = (0..m).map(|k| lg.df_c(&lg.holo(2 * k))).collect();
    CMat::from_columns(&cols)
}

/// Complex Gauss map and flag lift.  An isotropy defect of `τ'` above
/// `iso_tol` means `J` is not orthogonal, so the input is not Kähler.
pub fn complex_gauss(lg: &LocalGeometry, iso_tol: f64) -> Result<FlagPoint> {
    let n = lg.n();
    let tau1 = orthonormal_tau1(&tau1_generators(lg))?;
    let nf: Vec<CVec> = normal_frame(lg)?.iter().map(complexify_vec).collect();
    let fp = FlagPoint { tau2: tau1.map(|z| z.conj()), tau1, normal: frame_matrix(&nf, n) };
    let iso = fp.isotropy_defect();
    if iso > iso_tol {
        return Err(Error::InvalidComplexStructure(format!("tau' is not isotropic (defect {iso:.3e})")));
    }
    Ok(fp)
}

/// Gauge-jump bound between neighbouring grid points.
pub const GAUGE_JUMP: f64 = 0.5;

/// Longest chart step between consecutive frame samples in the gauge sweep.
pub const GAUGE_STEP: f64 = 0.05;

/// Gram–Schmidt frame of the `τ'` generators (the gauge used throughout).
fn orthonormal_tau1(s: &CMat) -> Result<CMat> {
    let gens: Vec<CVec> = s.column_iter().map(|c| c.into_owned()).collect();
    let scale = gens.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let t1 = gram_schmidt(&gens, 1e-9, scale);
    if t1.len() != gens.len() {
        return Err(Error::RankDeficient { rank: t1.len(), expected: gens.len() });
    }
    Ok(frame_matrix(&t1, s.nrows()))
}

/// `τ'` frame from the first derivatives alone: `df((∂x_k - i ∂y_k)/2)`.
fn tau1_frame_at(imm: &ChartedImmersion, q: &[f64]) -> Result<CMat> {
    let jet = crate::chart::eval_jet(imm, q, JetMode::Analytic, crate::chart::DEFAULT_H)?;
    let half = C64::new(0.5, 0.0);
    let cols: Vec<CVec> = (0..imm.complex_dim)
        .map(|k| {
            let x = complexify_vec(&jet.d1[2 * k]);
            let y = complexify_vec(&jet.d1[2 * k + 1]);
            (x - y * C64::new(0.0, 1.0)) * half
        })
        .collect();
    orthonormal_tau1(&CMat::from_columns(&cols))
}

/// Largest column jump of the `τ'` frame along the row-major sweep of grid
/// edges, each edge subdivided so consecutive samples are at most
/// [`GAUGE_STEP`] apart.
pub fn gauge_jump(imm: &ChartedImmersion, s: &Sampled) -> Result<f64> {
    let frames = s.grid.exec.try_map(&s.points, |lg| complex_gauss(lg, f64::INFINITY).map(|f| f.tau1))?;
    let edges: Vec<(usize, usize)> = (0..s.grid.len())
        .flat_map(|flat| {
            let idx = s.grid.multi_index(flat);
            (0..idx.len()).filter(move |&ax| idx[ax] > 0).map(move |ax| (flat, ax)).collect::<Vec<_>>()
        })
        .collect();
    let jumps = s.grid.exec.try_map(&edges, |&(flat, ax)| -> Result<f64> {
        let mut prev_idx = s.grid.multi_index(flat);
        prev_idx[ax] -= 1;
        let prev_flat = s.grid.flat_index(&prev_idx);
        let a = s.grid.point(prev_flat);
        let b = s.grid.point(flat);
        let steps = ((b[ax] - a[ax]).abs() / GAUGE_STEP).ceil().max(1.0) as usize;
        let mut last = frames[prev_flat].clone();
        let mut worst: f64 = 0.0;
        for k in 1..=steps {
            let cur = if k == steps {
                frames[flat].clone()
            } else {
                let mut q = a.clone();
                q[ax] += (b[ax] - a[ax]) * k as f64 / steps as f64;
                tau1_frame_at(imm, &q)?
            };
            for c in 0..cur.ncols() {
                worst = worst.max((cur.column(c) - last.column(c)).norm());
            }
            last = cur;
        }
        Ok(worst)
    })?;
    let worst = crate::exec::sup(jumps);
    if worst > GAUGE_JUMP {
        return Err(Error::GaugeJump { jump: worst });
    }
    Ok(worst)
}

/// Analytic route: `Π_τ'' (∂_v S) R⁻¹` where `S = F R` is the Gram–Schmidt
/// factorisation of the `τ'` generators.
pub fn superhorizontal_defect_analytic(lg: &LocalGeometry) -> Result<f64> {
    let fp = complex_gauss(lg, f64::INFINITY)?;
    let s = tau1_generators(lg);
    let r = fp.tau1.adjoint() * &s;
    let r_inv = r.try_inverse().ok_or(Error::SingularMetric)?;
    let pi2 = &fp.tau2 * fp.tau2.adjoint();
    let m = lg.dim() / 2;
    let mut worst: f64 = 0.0;
    for v in 0..lg.dim() {
        let bv = lg.basis(v);
        let ds = CMat::from_columns(&(0..m).map(|k| lg.d2_c(&bv, &lg.holo(2 * k))).collect::<Vec<_>>());
        let comp = &pi2 * ds * &r_inv;
        worst = worst.max(comp.column_iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    Ok(worst)
}

/// Finite-difference route: central differences of the orthonormal `τ'`
/// frame at `p ± h e_v`, projected to `τ''`.
pub fn superhorizontal_defect_fd(imm: &ChartedImmersion, lg: &LocalGeometry, h: f64) -> Result<f64> {
    let fp = complex_gauss(lg, f64::INFINITY)?;
    let pi2 = &fp.tau2 * fp.tau2.adjoint();
    let frame_at = |q: &[f64]| tau1_frame_at(imm, q);
    let mut worst: f64 = 0.0;
    for v in 0..lg.dim() {
        let mut a = lg.point.clone();
        let mut b = lg.point.clone();
        a[v] += h;
        b[v] -= h;
        let df = (frame_at(&a)? - frame_at(&b)?) / C64::new(2.0 * h, 0.0);
        let comp = &pi2 * df;
        worst = worst.max(comp.column_iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Superhorizontality {
    pub analytic: f64,
    pub fd: f64,
    pub gauge_jump: f64,
}

impl Superhorizontality {
    pub fn residual(&self) -> f64 {
        self.analytic.max(self.fd)
    }
}

pub fn superhorizontality(imm: &ChartedImmersion, s: &Sampled, h: f64) -> Result<Superhorizontality> {
    let jump = gauge_jump(imm, s)?;
    let an = s.grid.exec.try_map(&s.points, superhorizontal_defect_analytic)?;
    let fd = s.grid.exec.try_map(&s.points, |lg| superhorizontal_defect_fd(imm, lg, h))?;
    Ok(Superhorizontality { analytic: crate::exec::sup(an), fd: crate::exec::sup(fd), gauge_jump: jump })
}

/// Both holomorphicity routes: `sup |α(π'∂_a, π''∂_b)|` and the component of
/// the `(0,1)`-derivative of `τ'` leaving `τ'`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Holomorphicity {
    pub alpha11: f64,
    pub frame_derivative: f64,
}

impl Holomorphicity {
    pub fn residual(&self) -> f64 {
        self.alpha11.max(self.frame_derivative)
    }
}

fn holomorphicity_at(lg: &LocalGeometry) -> Result<(f64, f64)> {
    let fp = complex_gauss(lg, f64::INFINITY)?;
    let n = lg.n();
    let out = CMat::identity(n, n) - &fp.tau1 * fp.tau1.adjoint();
    let d = lg.dim();
    let (mut r1, mut r2): (f64, f64) = (0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            r1 = r1.max(lg.alpha_c(&lg.holo(a), &lg.antiholo(b)).norm());
            r2 = r2.max((&out * lg.d2_c(&lg.antiholo(a), &lg.holo(b))).norm());
        }
    }
    Ok((r1, r2))
}

pub fn holomorphicity(s: &Sampled) -> Result<Holomorphicity> {
    let vals = s.grid.exec.try_map(&s.points, holomorphicity_at)?;
    Ok(Holomorphicity {
        alpha11: crate::exec::sup(vals.iter().map(|v| v.0)),
        frame_derivative: crate::exec::sup(vals.iter().map(|v| v.1)),
    })
}

/// Relative rank threshold for spans of `α` values.
pub const SPAN_TOL: f64 = 1e-7;
/// Below this absolute scale a span of `α` values is treated as zero.
pub const SPAN_FLOOR: f64 = 1e-10;

/// Generators of `N°`: `α^(1,1)(∂_i, ∂_j)` for `i ≤ j`, lexicographic.
pub fn n0_generators(lg: &LocalGeometry) -> Vec<CVec> {
    let (_, a11, _) = decompose_alpha(&lg.alpha, &lg.j);
    let d = lg.dim();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            out.push(a11.get(i, j).clone());
        }
    }
    out
}

/// Generators of `N'`: `α^(2,0)(∂_i, ∂_j)` for `i ≤ j`, lexicographic.
pub fn n1_generators(lg: &LocalGeometry) -> Vec<CVec> {
    let (a20, _, _) = decompose_alpha(&lg.alpha, &lg.j);
    let d = lg.dim();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            out.push(a20.get(i, j).clone());
        }
    }
    out
}

fn alpha_scale(lg: &LocalGeometry) -> f64 {
    lg.alpha.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn span_frame(gens: &[CVec], scale: f64) -> Vec<CVec> {
    if scale < SPAN_FLOOR {
        return Vec::new();
    }
    gram_schmidt(gens, SPAN_TOL, scale)
}

/// `(term1, term2)`: `sup |<α(T',T'), conj N°>|` and the ppmc residual.
#[derive(Clone, Debug, Serialize)]
pub struct HalfIsotropy {
    pub term1: f64,
    pub term2: f64,
    pub n0_rank_min: usize,
    pub n0_rank_max: usize,
    pub warnings: Vec<String>,
}

impl HalfIsotropy {
    pub fn residual(&self) -> f64 {
        self.term1.max(self.term2)
    }
}

pub fn half_isotropy(s: &Sampled, ppmc: f64) -> HalfIsotropy {
    let vals = s.grid.exec.map(&s.points, |lg| {
        let scale = alpha_scale(lg);
        let n0 = span_frame(&n0_generators(lg), scale);
        let mut worst: f64 = 0.0;
        for g in n1_generators(lg) {
            for e in &n0 {
                worst = worst.max(herm(&g, &conj_vec(e)).norm());
            }
        }
        (worst, n0.len())
    });
    let rmin = vals.iter().map(|v| v.1).min().unwrap_or(0);
    let rmax = vals.iter().map(|v| v.1).max().unwrap_or(0);
    let mut warnings = Vec::new();
    if rmin != rmax {
        warnings.push(format!("N0 rank varies over the grid ({rmin}..{rmax})"));
    }
    HalfIsotropy { term1: crate::exec::sup(vals.iter().map(|v| v.0)), term2: ppmc, n0_rank_min: rmin, n0_rank_max: rmax, warnings }
}

/// `N' ⊕ N° ⊕ N''` at one point with its residuals.
#[derive(Clone, Debug)]
pub struct IsotropyPoint {
    pub n1: Vec<CVec>,
    pub n0: Vec<CVec>,
    pub n2: Vec<CVec>,
    pub orthogonality: f64,
    pub parallelity: f64,
}

/// Ambient derivatives `∂_w` of the `N°` generators, matching [`n0_generators`].
fn n0_generator_derivatives(lg: &LocalGeometry, w: &CVec) -> Vec<CVec> {
    let d = lg.dim();
    let jc = complexify(&lg.j);
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            let (ei, ej) = (lg.basis(i), lg.basis(j));
            let (ji, jj) = (&jc * &ei, &jc * &ej);
            let v = (lg.dalpha_ambient_c(w, &ei, &ej) + lg.dalpha_ambient_c(w, &ji, &jj)) * C64::new(0.5, 0.0);
            out.push(v);
        }
    }
    out
}

fn n1_generator_derivatives(lg: &LocalGeometry, w: &CVec) -> Vec<CVec> {
    let d = lg.dim();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            out.push(lg.dalpha_ambient_c(w, &lg.holo(i), &lg.holo(j)));
        }
    }
    out
}

fn leak(frame: &[CVec], v: &CVec) -> f64 {
    let mut r = v.clone();
    for e in frame {
        r -= e * herm(v, e);
    }
    r.norm()
}

pub fn isotropy_at(lg: &LocalGeometry) -> IsotropyPoint {
    let scale = alpha_scale(lg);
    let n0 = span_frame(&n0_generators(lg), scale);
    let n1 = span_frame(&n1_generators(lg), scale);
    let n2: Vec<CVec> = n1.iter().map(conj_vec).collect();
    let mut orth: f64 = 0.0;
    for (x, y) in [(&n1, &n0), (&n1, &n2), (&n0, &n2)] {
        for a in x.iter() {
            for b in y.iter() {
                orth = orth.max(herm(a, b).norm());
            }
        }
    }
    let qn = complexify(&lg.normal_projector);
    let mut par: f64 = 0.0;
    for w in 0..lg.dim() {
        let bw = lg.basis(w);
        for g in n0_generator_derivatives(lg, &bw) {
            par = par.max(leak(&n0, &(&qn * g)));
        }
        for g in n1_generator_derivatives(lg, &bw) {
            par = par.max(leak(&n1, &(&qn * g)));
        }
    }
    IsotropyPoint { n1, n0, n2, orthogonality: orth, parallelity: par }
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotropyDecomposition {
    pub n1_rank: (usize, usize),
    pub n0_rank: (usize, usize),
    pub orthogonality: f64,
    pub parallelity: f64,
}

/// Builds `N'`, `N°`, `N''` on the grid; a rank change is an error.
pub fn isotropy_decomposition(s: &Sampled) -> Result<IsotropyDecomposition> {
    let pts = s.grid.exec.map(&s.points, isotropy_at);
    let range = |f: fn(&IsotropyPoint) -> usize| {
        let v: Vec<usize> = pts.iter().map(f).collect();
        (v.iter().copied().min().unwrap_or(0), v.iter().copied().max().unwrap_or(0))
    };
    let n1_rank = range(|p| p.n1.len());
    let n0_rank = range(|p| p.n0.len());
    for (name, (lo, hi)) in [("N'", n1_rank), ("N0", n0_rank)] {
        if lo != hi {
            return Err(Error::RankDrop { bundle: name.into(), min: lo, max: hi });
        }
    }
    Ok(IsotropyDecomposition {
        n1_rank,
        n0_rank,
        orthogonality: crate::exec::sup(pts.iter().map(|p| p.orthogonality)),
        parallelity: crate::exec::sup(pts.iter().map(|p| p.parallelity)),
    })
}

/// Residuals of the `(1,0)`-derivative chain
/// `N'' → τ'' → N° → τ' → N' → 0`, named by arrow.
pub fn differential_chain_at(lg: &LocalGeometry) -> Result<Vec<(&'static str, f64)>> {
    let iso = isotropy_at(lg);
    let fp = complex_gauss(lg, f64::INFINITY)?;
    let cols = |m: &CMat| -> Vec<CVec> { m.column_iter().map(|c| c.into_owned()).collect() };
    let t1 = cols(&fp.tau1);
    let t2 = cols(&fp.tau2);
    let d = lg.dim();
    let m = d / 2;
    let mut out = Vec::new();
    let mut arrow = |name: &'static str, src: &[CVec], tgt: &[CVec], derivs: Vec<CVec>| {
        let mut both: Vec<CVec> = src.to_vec();
        both.extend_from_slice(tgt);
        let worst = derivs.iter().map(|v| leak(&both, v)).fold(0.0, f64::max);
        out.push((name, worst));
    };
    for k in 0..m {
        let z = lg.holo(2 * k);
        let n2_d: Vec<CVec> = n1_generator_derivatives_conj(lg, &z);
        arrow("N''->tau''", &iso.n2, &t2, n2_d);
        let t2_d: Vec<CVec> = (0..d).map(|a| lg.d2_c(&z, &lg.antiholo(a))).collect();
        arrow("tau''->N0", &t2, &iso.n0, t2_d);
        arrow("N0->tau'", &iso.n0, &t1, n0_generator_derivatives(lg, &z));
        let t1_d: Vec<CVec> = (0..d).map(|a| lg.d2_c(&z, &lg.holo(a))).collect();
        arrow("tau'->N'", &t1, &iso.n1, t1_d);
        arrow("N'->0", &iso.n1, &[], n1_generator_derivatives(lg, &z));
    }
    // merge the per-direction entries
    let mut merged: Vec<(&'static str, f64)> = Vec::new();
    for (name, v) in out {
        match merged.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.1 = e.1.max(v),
            None => merged.push((name, v)),
        }
    }
    Ok(merged)
}

/// `∂_w α(π''∂_i, π''∂_j)`, the derivatives of the `N''` generators.
fn n1_generator_derivatives_conj(lg: &LocalGeometry, w: &CVec) -> Vec<CVec> {
    let d = lg.dim();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            out.push(lg.dalpha_ambient_c(w, &lg.antiholo(i), &lg.antiholo(j)));
        }
    }
    out
}

pub fn differential_chain_residual(s: &Sampled) -> Result<Vec<(String, f64)>> {
    let per = s.grid.exec.try_map(&s.points, differential_chain_at)?;
    let mut merged: Vec<(String, f64)> = Vec::new();
    for list in per {
        for (name, v) in list {
            match merged.iter_mut().find(|e| e.0 == name) {
                Some(e) => e.1 = e.1.max(v),
                None => merged.push((name.to_string(), v)),
            }
        }
    }
    Ok(merged)
}

/// Real section `f - m` of the normal bundle for an immersion into a sphere.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussSection {
    /// `sup |<f - m, d1_k>|`
    pub normality: f64,
    /// `sup | |f - m| - r |`
    pub radius_spread: f64,
    /// `sup |<α(x,y), f - m> + g(x,y)|`, umbilicity along `f - m`
    pub umbilicity: f64,
    /// `sup |(I - Π_τ') d(f - m)(π'∂_a)|`
    pub type_defect: f64,
}

impl GaussSection {
    pub fn residual(&self) -> f64 {
        self.normality.max(self.radius_spread).max(self.umbilicity).max(self.type_defect)
    }
}

pub fn gauss_section_check(s: &Sampled, sphere: &MeanCurvatureData) -> Result<GaussSection> {
    let (Some(center), Some(radius)) = (&sphere.center, sphere.radius) else {
        return Err(Error::NotSpherical { reason: "no constant sphere centre".into() });
    };
    if !sphere.minimal_in_sphere {
        return Err(Error::NotSpherical { reason: "sphere reduction failed".into() });
    }
    let m = crate::linalg::RVec::from_vec(center.clone());
    let vals = s.grid.exec.try_map(&s.points, |lg| -> Result<[f64; 4]> {
        let xi = &lg.jet.value - &m;
        let d = lg.dim();
        let mut normality: f64 = 0.0;
        let mut umb: f64 = 0.0;
        for k in 0..d {
            normality = normality.max(xi.dot(&lg.jet.d1[k]).abs());
            for l in 0..d {
                umb = umb.max((lg.alpha.get(k, l).dot(&xi) + lg.metric.g[(k, l)]).abs());
            }
        }
        let fp = complex_gauss(lg, f64::INFINITY)?;
        let out = CMat::identity(lg.n(), lg.n()) - &fp.tau1 * fp.tau1.adjoint();
        let ty = (0..d).map(|a| (&out * lg.df_c(&lg.holo(a))).norm()).fold(0.0, f64::max);
        Ok([normality, (xi.norm() - radius).abs(), umb, ty])
    })?;
    let col = |i: usize| crate::exec::sup(vals.iter().map(|v| v[i]));
    Ok(GaussSection { normality: col(0), radius_spread: col(1), umbilicity: col(2), type_defect: col(3) })
}

/// Projector onto `τ'` at a point, for callers that need the raw matrix.
pub fn tau1_projector(lg: &LocalGeometry) -> Result<CMat> {
    let fp = complex_gauss(lg, f64::INFINITY)?;
    let cols: Vec<CVec> = fp.tau1.column_iter().map(|c| c.into_owned()).collect();
    Ok(projector(&cols, lg.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::forms::{mean_curvature_and_sphere_reduction, ppmc_residual};

    fn sample(imm: &ChartedImmersion, n: usize) -> Sampled {
        Sampled::new(imm, &Grid::interior(&imm.domain, n), JetMode::Analytic, 1e-4).unwrap()
    }

    #[test]
    fn first_order_frame_matches_full_gauss_map() {
        for imm in [fixtures::veronese(), fixtures::sphere_product()] {
            let q: Vec<f64> = imm.domain.lo.iter().zip(&imm.domain.hi).map(|(a, b)| 0.4 * a + 0.6 * b).collect();
            let lg = LocalGeometry::at(&imm, &q, JetMode::Analytic, 1e-4).unwrap();
            let full = complex_gauss(&lg, f64::INFINITY).unwrap().tau1;
            let fast = tau1_frame_at(&imm, &q).unwrap();
            assert!((full - fast).norm() < 1e-12, "{}", imm.name);
        }
    }

    #[test]
    fn projection_examples() {
        let plane = fixtures::plane();
        let p = gauss_projection(&eval_jet(&plane, &[0.1, 0.2], JetMode::Analytic, 1e-4).unwrap()).unwrap();
        let mut expect = RMat::zeros(3, 3);
        expect[(0, 0)] = 1.0;
        expect[(1, 1)] = 1.0;
        assert!((p.p - expect).amax() < 1e-15);

        let sph = fixtures::sphere();
        let jet = eval_jet(&sph, &[0.3, -0.4], JetMode::Analytic, 1e-4).unwrap();
        let f = jet.value.clone();
        let gp = gauss_projection(&jet).unwrap();
        assert!((&gp.p - (RMat::identity(3, 3) - &f * f.transpose())).amax() < 1e-14);
        assert!(gp.defect(2) < 1e-12);
    }

    #[test]
    fn grassmann_invariants_on_every_fixture() {
        for r in fixtures::registry() {
            let s = sample(&r.immersion, 3);
            let worst = s.sup(|lg| GrassmannPoint { p: lg.tangent_projector.clone() }.defect(lg.dim()));
            assert!(worst < 1e-10, "{} {worst}", r.name);
        }
    }

    #[test]
    fn gauss_differential_agrees_with_alpha() {
        let sph = fixtures::sphere();
        assert!(dgauss_check(&sph, &[0.2, 0.1], 1e-4).unwrap() < 1e-6);
        let cat = fixtures::catenoid();
        assert!(dgauss_check(&cat, &[0.4, 0.3], 1e-4).unwrap() < 1e-5);
        assert!(dgauss_check(&fixtures::plane(), &[0.4, 0.3], 1e-4).unwrap() == 0.0);
    }

    #[test]
    fn hessian_oracle_matches_covariant_derivative() {
        for r in [fixtures::ellipsoid(), fixtures::veronese(), fixtures::catenoid()] {
            let dev = gauss_hessian_fd_defect(&r, &[0.1, 0.05], 1e-3).unwrap();
            assert!(dev < 1e-3, "{} {dev}", r.name);
        }
    }

    #[test]
    fn levi_residual_tracks_ppmc() {
        let sph = sample(&fixtures::sphere(), 9);
        assert!(gauss_levi_residual(&sph) < 1e-8);
        let ell = sample(&fixtures::ellipsoid(), 9);
        assert!(gauss_levi_residual(&ell) > 1e-2);
        assert!(ppmc_residual(&ell) > 1e-2);
    }

    #[test]
    fn flag_lift_of_holomorphic_curve() {
        let lg = LocalGeometry::at(&fixtures::holomorphic_curve(), &[0.3, 0.2], JetMode::Analytic, 1e-4).unwrap();
        let fp = complex_gauss(&lg, 1e-10).unwrap();
        assert_eq!(fp.dims(), (1, 2, 1));
        assert!(fp.orthogonality_defect() < 1e-12);
        assert!(fp.conjugation_defect() == 0.0);
        // tangent line of z -> (z, z^2) is spanned by (1, 2z) in C^2 = (x1,y1,x2,y2)
        let z = C64::new(0.3, 0.2);
        let w = z * 2.0;
        let t = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, -1.0), w, -C64::new(0.0, 1.0) * w]);
        assert!(leak(&[fp.tau1.column(0).into_owned()], &t) < 1e-12);
    }

    #[test]
    fn skewed_plane_flag_lift_is_rejected() {
        let lg = LocalGeometry::at(&fixtures::skewed_plane(), &[0.0, 0.0], JetMode::Analytic, 1e-4).unwrap();
        assert!(matches!(complex_gauss(&lg, 1e-10), Err(Error::InvalidComplexStructure(_))));
    }

    #[test]
    fn superhorizontal_on_ellipsoid_and_veronese() {
        for imm in [fixtures::ellipsoid(), fixtures::veronese(), fixtures::plane()] {
            let s = sample(&imm, 5);
            let sh = superhorizontality(&imm, &s, 1e-4).unwrap();
            assert!(sh.residual() < 1e-5, "{} {:?}", imm.name, sh);
        }
    }

    #[test]
    fn holomorphicity_routes() {
        let h = holomorphicity(&sample(&fixtures::holomorphic_curve(), 5)).unwrap();
        assert!(h.alpha11 < 1e-8 && h.frame_derivative < 1e-8, "{h:?}");
        let s = holomorphicity(&sample(&fixtures::sphere(), 5)).unwrap();
        assert!(s.alpha11 > 1e-1 && s.frame_derivative > 1e-1, "{s:?}");
        assert!((s.alpha11 - s.frame_derivative).abs() < 1e-10);
    }

    #[test]
    fn veronese_isotropy_and_chain() {
        let s = sample(&fixtures::veronese(), 5);
        let iso = isotropy_decomposition(&s).unwrap();
        assert!(iso.orthogonality < 1e-8 && iso.parallelity < 1e-5, "{iso:?}");
        assert_eq!(iso.n0_rank, (1, 1));
        assert_eq!(iso.n1_rank, (1, 1));
        let hi = half_isotropy(&s, 0.0);
        assert!(hi.term1 < 1e-6);
        for (name, v) in differential_chain_residual(&s).unwrap() {
            assert!(v < 1e-4, "{name} {v}");
        }
    }

    #[test]
    fn standard_embedding_has_no_n1() {
        let s = sample(&fixtures::standard_embedding(), 5);
        let iso = isotropy_decomposition(&s).unwrap();
        assert_eq!(iso.n1_rank, (0, 0));
        let curve = isotropy_decomposition(&sample(&fixtures::holomorphic_curve(), 5)).unwrap();
        assert_eq!(curve.n0_rank, (0, 0));
    }

    #[test]
    fn gauss_section_examples() {
        for imm in [fixtures::sphere(), fixtures::veronese()] {
            let s = sample(&imm, 5);
            let mc = mean_curvature_and_sphere_reduction(&s, 1e-8);
            let gs = gauss_section_check(&s, &mc).unwrap();
            assert!(gs.residual() < 1e-7, "{} {gs:?}", imm.name);
        }
        let cat = sample(&fixtures::catenoid(), 5);
        let mc = mean_curvature_and_sphere_reduction(&cat, 1e-8);
        assert!(matches!(gauss_section_check(&cat, &mc), Err(Error::NotSpherical { .. })));
    }
}
