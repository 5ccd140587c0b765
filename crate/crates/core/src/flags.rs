//! Canonical elements of `u(n)` and `so(n)`, the gradings of the
//! complexified algebras by `ad(ξ)`, the generation conditions, and the
//! splitting of a pair of orthogonal complex structures.

use nalgebra::linalg::SymmetricEigen;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::{complex_gauss, tau1_generators};
use crate::linalg::{
    cluster_sorted, column_projector_derivative, commutator, frob_herm, gram_schmidt, max_abs, max_abs_c, sym, CMat,
    CVec, RMat, C64, I,
};
use crate::local::Sampled;

/// Tolerance for grouping eigenvalues of `-iξ`.
pub const EIGEN_CLUSTER: f64 = 1e-9;
/// Integer test for eigenvalue gaps.
pub const C1_TOL: f64 = 1e-9;
/// Singular-value threshold for closure ranks.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Algebra {
    Unitary(usize),
    Orthogonal(usize),
}

impl Algebra {
    pub fn n(self) -> usize {
        match self {
            Algebra::Unitary(n) | Algebra::Orthogonal(n) => n,
        }
    }

    /// Complex dimension of the complexified algebra.
    pub fn dim(self) -> usize {
        match self {
            Algebra::Unitary(n) => n * n,
            Algebra::Orthogonal(n) => n * (n - 1) / 2,
        }
    }

    /// Distance of `xi` from the real algebra.
    pub fn membership_defect(self, xi: &CMat) -> f64 {
        let skew = max_abs_c(&(xi + xi.adjoint()));
        match self {
            Algebra::Unitary(_) => skew,
            Algebra::Orthogonal(_) => skew.max(xi.iter().fold(0.0, |a, z| a.max(z.im.abs()))),
        }
    }

    /// Distance of `x` from the complexified algebra.
    pub fn complex_membership_defect(self, x: &CMat) -> f64 {
        match self {
            Algebra::Unitary(_) => 0.0,
            Algebra::Orthogonal(_) => max_abs_c(&(x + x.transpose())),
        }
    }
}

/// An eigenspace `E_j` of `-iξ` with eigenvalue `λ`.
#[derive(Clone, Debug)]
pub struct EigenSpace {
    pub lambda: f64,
    pub basis: CMat,
}

#[derive(Clone, Debug)]
pub struct CanonicalElement {
    pub algebra: Algebra,
    pub xi: CMat,
    /// Ascending eigenvalues.
    pub eigenflag: Vec<EigenSpace>,
    pub lambda0: Option<f64>,
}

fn check_orthonormal(cols: &CMat) -> Result<()> {
    let dev = max_abs_c(&(cols.adjoint() * cols - CMat::identity(cols.ncols(), cols.ncols())));
    if dev > 1e-10 {
        return Err(Error::NonOrthonormalFrame { deviation: dev });
    }
    Ok(())
}

fn assemble(flag: &[EigenSpace], n: usize) -> CMat {
    let mut xi = CMat::zeros(n, n);
    for e in flag {
        xi += &e.basis * e.basis.adjoint() * (I * e.lambda);
    }
    xi
}

/// `ξ = i(λ₀ I + Σ_j j E_j)`, `E_j` spanned by consecutive columns of
/// `frame` (the identity when `None`) with dimensions `dims`.
pub fn canonical_unitary(dims: &[usize], frame: Option<&CMat>, lambda0: f64) -> Result<CanonicalElement> {
    let n: usize = dims.iter().sum();
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidDims(format!("unitary profile {dims:?}")));
    }
    let u = frame.cloned().unwrap_or_else(|| CMat::identity(n, n));
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::InvalidDims(format!("frame is {}x{}, profile sums to {n}", u.nrows(), u.ncols())));
    }
    check_orthonormal(&u)?;
    let mut flag = Vec::new();
    let mut col = 0;
    for (j, &d) in dims.iter().enumerate() {
        flag.push(EigenSpace { lambda: lambda0 + (j + 1) as f64, basis: u.columns(col, d).into_owned() });
        col += d;
    }
    Ok(CanonicalElement { algebra: Algebra::Unitary(n), xi: assemble(&flag, n), eigenflag: flag, lambda0: Some(lambda0) })
}

/// `ξ = i Σ_j j E_j` with `E_{-j} = conj(E_j)`: `levels[k]` is the positive
/// eigenvalue carried by the isotropic frame `frames[k]`, and `e0` is a real
/// orthonormal frame of the zero eigenspace.
pub fn canonical_orthogonal(levels: &[f64], frames: &[CMat], e0: &RMat) -> Result<CanonicalElement> {
    if levels.len() != frames.len() || levels.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidDims("levels must be positive and match the frames".into()));
    }
    let n = frames.first().map(|f| f.nrows()).unwrap_or(e0.nrows());
    let mut cols: Vec<CVec> = Vec::new();
    for f in frames {
        cols.extend(f.column_iter().map(|c| c.into_owned()));
    }
    let positive = cols.len();
    for f in frames.iter().rev() {
        cols.extend(f.column_iter().map(|c| c.map(|z| z.conj())));
    }
    cols.extend(e0.column_iter().map(|c| c.map(|x| C64::new(x, 0.0))));
    if cols.len() != n {
        return Err(Error::InvalidDims(format!("2*{positive} + {} != {n}", e0.ncols())));
    }
    let all = CMat::from_columns(&cols);
    if let Err(Error::NonOrthonormalFrame { deviation }) = check_orthonormal(&all) {
        // orthonormality of E_j against conj(E_k) is the isotropy condition
        return Err(Error::ConjugationSymmetry { deviation });
    }
    let mut flag = Vec::new();
    for (l, f) in levels.iter().zip(frames).rev() {
        flag.push(EigenSpace { lambda: -l, basis: f.map(|z| z.conj()) });
    }
    if e0.ncols() > 0 {
        flag.push(EigenSpace { lambda: 0.0, basis: e0.map(|x| C64::new(x, 0.0)) });
    }
    for (l, f) in levels.iter().zip(frames) {
        flag.push(EigenSpace { lambda: *l, basis: f.clone() });
    }
    flag.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let xi = assemble(&flag, n);
    Ok(CanonicalElement { algebra: Algebra::Orthogonal(n), xi, eigenflag: flag, lambda0: None })
}

/// Isotropic frames built from coordinate pairs `(e_{2a} - i e_{2a+1})/√2`,
/// `dims[k]` of them for level `k`, and the remaining coordinates as `E_0`.
/// `rotation`, when given, is applied to every frame.
pub fn standard_orthogonal_frames(n: usize, dims: &[usize], rotation: Option<&RMat>) -> Result<(Vec<CMat>, RMat)> {
    let pairs: usize = dims.iter().sum();
    if 2 * pairs > n {
        return Err(Error::InvalidDims(format!("profile {dims:?} does not fit in R^{n}")));
    }
    let q = rotation.cloned().unwrap_or_else(|| RMat::identity(n, n));
    let qc = q.map(|x| C64::new(x, 0.0));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = 0;
    let mut frames = Vec::new();
    for &d in dims {
        let cols: Vec<CVec> = (0..d)
            .map(|_| {
                let mut v = CVec::zeros(n);
                v[2 * a] = C64::new(s, 0.0);
                v[2 * a + 1] = C64::new(0.0, -s);
                a += 1;
                &qc * v
            })
            .collect();
        frames.push(if cols.is_empty() { CMat::zeros(n, 0) } else { CMat::from_columns(&cols) });
    }
    let rest: Vec<_> = (2 * pairs..n).map(|k| q.column(k).into_owned()).collect();
    let e0 = if rest.is_empty() { RMat::zeros(n, 0) } else { RMat::from_columns(&rest) };
    Ok((frames, e0))
}

/// Canonical element of `so(n)` for levels `offset + 0, offset + 1, ...`
/// (`offset` is 1 or 1/2) with the given dimensions.
pub fn standard_orthogonal(n: usize, dims: &[usize], offset: f64, rotation: Option<&RMat>) -> Result<CanonicalElement> {
    let (frames, e0) = standard_orthogonal_frames(n, dims, rotation)?;
    let levels: Vec<f64> = (0..dims.len()).map(|k| offset + k as f64).collect();
    canonical_orthogonal(&levels, &frames, &e0)
}

fn hermitian_eigenflag(h: &CMat) -> Vec<EigenSpace> {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    cluster_sorted(&vals, EIGEN_CLUSTER)
        .into_iter()
        .map(|(s, e)| {
            let cols: Vec<CVec> = order[s..e].iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect();
            let lambda = vals[s..e].iter().sum::<f64>() / (e - s) as f64;
            EigenSpace { lambda, basis: CMat::from_columns(&cols) }
        })
        .collect()
}

impl CanonicalElement {
    /// Wraps an arbitrary algebra element, computing its eigenflag.
    pub fn from_matrix(algebra: Algebra, xi: CMat) -> Result<Self> {
        let dev = algebra.membership_defect(&xi);
        if dev > 1e-12 {
            return Err(Error::NotInAlgebra { algebra: format!("{algebra:?}"), deviation: dev });
        }
        let h = &xi * (-I);
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let eigenflag = hermitian_eigenflag(&h);
        Ok(CanonicalElement { algebra, xi, eigenflag, lambda0: None })
    }

    pub fn n(&self) -> usize {
        self.algebra.n()
    }

    /// Anti-Hermitian defect, reality defect for `so(n)`, and
    /// `|ξ u - iλ u|` on the eigenflag.
    pub fn invariant_defect(&self) -> f64 {
        let mut worst = self.algebra.membership_defect(&self.xi);
        for e in &self.eigenflag {
            worst = worst.max(max_abs_c(&(&self.xi * &e.basis - &e.basis * (I * e.lambda))));
        }
        worst
    }

    /// `|Π_{E_{-j}} - conj(Π_{E_j})|` over the flag; zero for `so(n)` elements.
    pub fn conjugation_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for e in &self.eigenflag {
            let partner = self.eigenflag.iter().find(|f| (f.lambda + e.lambda).abs() < EIGEN_CLUSTER);
            let pe = (&e.basis * e.basis.adjoint()).map(|z| z.conj());
            worst = worst.max(match partner {
                Some(f) => max_abs_c(&(&f.basis * f.basis.adjoint() - pe)),
                None => f64::INFINITY,
            });
        }
        worst
    }

    /// Height label `j` of each eigenspace: `λ - λ₀` for `u(n)`, `λ` for `so(n)`.
    pub fn labels(&self) -> Vec<f64> {
        let shift = self.lambda0.unwrap_or(0.0);
        self.eigenflag.iter().map(|e| e.lambda - shift).collect()
    }

    pub fn export(&self) -> CanonicalExport {
        CanonicalExport {
            algebra: self.algebra,
            xi: matrix_export(&self.xi),
            eigenvalues: self.eigenflag.iter().map(|e| e.lambda).collect(),
            eigenspace_dims: self.eigenflag.iter().map(|e| e.basis.ncols()).collect(),
            lambda0: self.lambda0,
        }
    }
}

/// Rows of `[re, im]` pairs.
pub fn matrix_export(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CanonicalExport {
    pub algebra: Algebra,
    pub xi: Vec<Vec<[f64; 2]>>,
    pub eigenvalues: Vec<f64>,
    pub eigenspace_dims: Vec<usize>,
    pub lambda0: Option<f64>,
}

/// A basis element `L` mapping `E_from` to `E_to`, eigenvector of `ad(ξ)`
/// with eigenvalue `i(λ_to - λ_from)`.
#[derive(Clone, Debug)]
pub struct GradedElement {
    pub matrix: CMat,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug)]
pub struct GradedSpace {
    pub degree: f64,
    /// Frobenius-orthonormal basis.
    pub basis: Vec<CMat>,
}

#[derive(Clone, Debug)]
pub struct Grading {
    pub algebra: Algebra,
    /// Ascending degree.
    pub spaces: Vec<GradedSpace>,
    /// Elementary generators `u_k v_j*` (or their skew parts), for Eq. (A3) checks.
    pub elementary: Vec<GradedElement>,
    pub c1: bool,
    /// Largest distance of an eigenvalue gap from the nearest integer.
    pub c1_defect: f64,
}

impl Grading {
    pub fn height(&self) -> f64 {
        self.spaces.iter().filter(|s| !s.basis.is_empty()).map(|s| s.degree).fold(0.0, f64::max)
    }

    pub fn space(&self, degree: f64) -> Option<&GradedSpace> {
        self.spaces.iter().find(|s| (s.degree - degree).abs() < 1e-6)
    }

    pub fn dim(&self, degree: f64) -> usize {
        self.space(degree).map(|s| s.basis.len()).unwrap_or(0)
    }

    pub fn total_dim(&self) -> usize {
        self.spaces.iter().map(|s| s.basis.len()).sum()
    }

    /// Dimensions of `g_{-r}, ..., g_r` for integer degrees.
    pub fn profile(&self) -> Vec<(i64, usize)> {
        self.spaces.iter().map(|s| (s.degree.round() as i64, s.basis.len())).collect()
    }

    pub fn export(&self) -> Vec<GradedExport> {
        self.spaces
            .iter()
            .map(|s| GradedExport { degree: s.degree, basis: s.basis.iter().map(matrix_export).collect() })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradedExport {
    pub degree: f64,
    pub basis: Vec<Vec<Vec<[f64; 2]>>>,
}

fn flatten(m: &CMat) -> CVec {
    CVec::from_iterator(m.len(), m.iter().cloned())
}

fn unflatten(v: &CVec, n: usize) -> CMat {
    CMat::from_iterator(n, n, v.iter().cloned())
}

/// Grades the complexified algebra by the eigenvalues of `(1/i) ad(ξ)`,
/// using the eigenflag of `ξ`: `ad(ξ)(u_k v_j*) = i(λ_k - λ_j) u_k v_j*`.
pub fn grade(ce: &CanonicalElement) -> Result<Grading> {
    let dev = ce.algebra.membership_defect(&ce.xi);
    if dev > 1e-12 {
        return Err(Error::NotInAlgebra { algebra: format!("{:?}", ce.algebra), deviation: dev });
    }
    let n = ce.n();
    let flag = &ce.eigenflag;
    let mut elementary = Vec::new();
    for (j, ej) in flag.iter().enumerate() {
        for (k, ek) in flag.iter().enumerate() {
            for a in 0..ej.basis.ncols() {
                for b in 0..ek.basis.ncols() {
                    let l = ek.basis.column(b) * ej.basis.column(a).adjoint();
                    let m = match ce.algebra {
                        Algebra::Unitary(_) => l,
                        Algebra::Orthogonal(_) => &l - l.transpose(),
                    };
                    elementary.push(GradedElement { matrix: m, from: j, to: k });
                }
            }
        }
    }
    let mut gaps: Vec<f64> = elementary.iter().map(|e| flag[e.to].lambda - flag[e.from].lambda).collect();
    let c1_defect = gaps.iter().map(|g| (g - g.round()).abs()).fold(0.0, f64::max);
    let c1 = c1_defect <= C1_TOL;
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    if c1 {
        gaps.iter_mut().for_each(|g| *g = g.round());
        sorted.iter_mut().for_each(|g| *g = g.round());
        sorted.dedup();
    }
    let spaces = sorted
        .iter()
        .map(|&deg| {
            let gens: Vec<CVec> = elementary
                .iter()
                .zip(&gaps)
                .filter(|(_, g)| (**g - deg).abs() < 1e-6)
                .map(|(e, _)| flatten(&e.matrix))
                .collect();
            let basis = gram_schmidt(&gens, 1e-9, 1.0).iter().map(|v| unflatten(v, n)).collect();
            GradedSpace { degree: deg, basis }
        })
        .collect();
    Ok(Grading { algebra: ce.algebra, spaces, elementary, c1, c1_defect })
}

/// `sup |ad(ξ) L - i(λ_to - λ_from) L|` over the elementary generators.
pub fn a3_residual(ce: &CanonicalElement, gr: &Grading) -> f64 {
    gr.elementary
        .iter()
        .map(|e| {
            let w = ce.eigenflag[e.to].lambda - ce.eigenflag[e.from].lambda;
            max_abs_c(&(commutator(&ce.xi, &e.matrix) - &e.matrix * (I * w)))
        })
        .fold(0.0, f64::max)
}

fn component_outside(x: &CMat, basis: &[CMat]) -> f64 {
    let mut r = x.clone();
    for b in basis {
        r -= b * frob_herm(x, b);
    }
    r.norm()
}

/// `sup |[A, B]|` outside `g_{j+k}` over basis pairs `A ∈ g_j`, `B ∈ g_k`.
pub fn bracket_grading_residual(gr: &Grading) -> f64 {
    let mut worst: f64 = 0.0;
    for sj in &gr.spaces {
        for sk in &gr.spaces {
            let target: &[CMat] = gr.space(sj.degree + sk.degree).map(|s| s.basis.as_slice()).unwrap_or(&[]);
            for a in &sj.basis {
                for b in &sk.basis {
                    worst = worst.max(component_outside(&commutator(a, b), target));
                }
            }
        }
    }
    worst
}

/// `sup` distance of `-A*` from `g_{-k}` for `A ∈ g_k`, plus the distance
/// of every basis element from the complexified algebra.
pub fn grading_symmetry_residual(gr: &Grading) -> f64 {
    let mut worst: f64 = 0.0;
    for s in &gr.spaces {
        let target: &[CMat] = gr.space(-s.degree).map(|t| t.basis.as_slice()).unwrap_or(&[]);
        for a in &s.basis {
            worst = worst.max(component_outside(&(-a.adjoint()), target));
            worst = worst.max(gr.algebra.complex_membership_defect(a));
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct GenerationReport {
    pub algebra_dim: usize,
    /// Dimension reached by bracket closure of `g_1 + g_{-1}`.
    pub closure_dim: usize,
    /// Same, confirmed by singular values of the spanning set.
    pub closure_dim_svd: usize,
    /// Dimension after adjoining the centre (`u(n)` only).
    pub with_center: usize,
    pub rounds: usize,
    pub pass: bool,
}

/// Condition C2: iterates `V ← V + [V, V]` from `V = g_1 + g_{-1}` until
/// the dimension stabilises, capped at `dim²` rounds.  For `u(n)` the
/// centre, which brackets never reach, is adjoined before comparing.
pub fn generation_check(gr: &Grading) -> GenerationReport {
    let n = gr.algebra.n();
    let mut gens: Vec<CVec> = Vec::new();
    for deg in [1.0, -1.0] {
        if let Some(s) = gr.space(deg) {
            gens.extend(s.basis.iter().map(flatten));
        }
    }
    let mut v = gram_schmidt(&gens, RANK_TOL, 1.0);
    let cap = gr.algebra.dim() * gr.algebra.dim();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mats: Vec<CMat> = v.iter().map(|x| unflatten(x, n)).collect();
        let mut next = v.clone();
        for i in 0..mats.len() {
            for j in (i + 1)..mats.len() {
                next.push(flatten(&commutator(&mats[i], &mats[j])));
            }
        }
        let grown = gram_schmidt(&next, RANK_TOL, 1.0);
        let done = grown.len() == v.len();
        v = grown;
        if done || rounds >= cap {
            break;
        }
    }
    let closure_dim = v.len();
    let closure_dim_svd = if v.is_empty() {
        0
    } else {
        let m = CMat::from_columns(&v);
        m.svd(false, false).singular_values.iter().filter(|&&s| s > RANK_TOL).count()
    };
    let with_center = match gr.algebra {
        Algebra::Unitary(_) => {
            let mut all = v.clone();
            all.push(flatten(&CMat::identity(n, n)) / C64::new((n as f64).sqrt(), 0.0));
            gram_schmidt(&all, RANK_TOL, 1.0).len()
        }
        Algebra::Orthogonal(_) => closure_dim,
    };
    GenerationReport {
        algebra_dim: gr.algebra.dim(),
        closure_dim,
        closure_dim_svd,
        with_center,
        rounds,
        pass: with_center == gr.algebra.dim() && closure_dim == closure_dim_svd,
    }
}

/// Even and odd parts of the grading with the Cartan relations.
#[derive(Clone, Debug, Serialize)]
pub struct CartanSplit {
    pub dim_k: usize,
    pub dim_p: usize,
    /// `sup` of `[k,k] ⊄ k`, `[k,p] ⊄ p`, `[p,p] ⊄ k`.
    pub relations: f64,
    /// `sup` of the parts of `p` inside `End(E_ev) ⊕ End(E_odd)` and of `k`
    /// inside `Hom(E_ev, E_odd) ⊕ Hom(E_odd, E_ev)`.
    pub a4: f64,
}

fn parity_even(degree: f64) -> bool {
    (degree.round() as i64).rem_euclid(2) == 0
}

/// Projector onto `E_ev = Σ_{j+r even} E_j`, `r` the largest label.
pub fn even_projector(ce: &CanonicalElement) -> CMat {
    let labels = ce.labels();
    let r = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = ce.n();
    let mut p = CMat::zeros(n, n);
    for (e, j) in ce.eigenflag.iter().zip(&labels) {
        if parity_even(j + r) {
            p += &e.basis * e.basis.adjoint();
        }
    }
    p
}

pub fn cartan_split(ce: &CanonicalElement, gr: &Grading) -> CartanSplit {
    let k: Vec<&CMat> = gr.spaces.iter().filter(|s| parity_even(s.degree)).flat_map(|s| &s.basis).collect();
    let p: Vec<&CMat> = gr.spaces.iter().filter(|s| !parity_even(s.degree)).flat_map(|s| &s.basis).collect();
    let kk: Vec<CMat> = k.iter().map(|m| (*m).clone()).collect();
    let pp: Vec<CMat> = p.iter().map(|m| (*m).clone()).collect();
    let mut rel: f64 = 0.0;
    for (xs, ys, target) in [(&kk, &kk, &kk), (&kk, &pp, &pp), (&pp, &pp, &kk)] {
        for a in xs.iter() {
            for b in ys.iter() {
                rel = rel.max(component_outside(&commutator(a, b), target));
            }
        }
    }
    let pe = even_projector(ce);
    let po = CMat::identity(ce.n(), ce.n()) - &pe;
    let mut a4: f64 = 0.0;
    for x in &pp {
        a4 = a4.max((&pe * x * &pe).norm()).max((&po * x * &po).norm());
    }
    for x in &kk {
        a4 = a4.max((&pe * x * &po).norm()).max((&po * x * &pe).norm());
    }
    CartanSplit { dim_k: kk.len(), dim_p: pp.len(), relations: rel, a4 }
}

#[derive(Clone, Debug)]
pub struct SuperhorizontalSpace {
    /// `g_1`
    pub superhorizontal: Vec<CMat>,
    /// Odd part.
    pub horizontal: Vec<CMat>,
    /// `Σ_{k>0} g_k`
    pub holomorphic_tangent: Vec<CMat>,
    /// `true` when `g_{±2} = 0`, so horizontal and `g_1 + g_{-1}` agree.
    pub horizontal_is_superhorizontal: bool,
}

pub fn superhorizontal_space(gr: &Grading) -> SuperhorizontalSpace {
    let collect = |f: &dyn Fn(f64) -> bool| -> Vec<CMat> {
        gr.spaces.iter().filter(|s| f(s.degree)).flat_map(|s| s.basis.iter().cloned()).collect()
    };
    let superhorizontal = collect(&|d| (d - 1.0).abs() < 1e-6);
    let horizontal = collect(&|d| !parity_even(d));
    let holomorphic_tangent = collect(&|d| d > 0.5);
    let plus_minus_one = gr.dim(1.0) + gr.dim(-1.0);
    SuperhorizontalSpace {
        horizontal_is_superhorizontal: horizontal.len() == plus_minus_one,
        superhorizontal,
        horizontal,
        holomorphic_tangent,
    }
}

/// Corollary properties of `E_ev`: conjugation invariance (integer height)
/// or maximal isotropy (half-integer height, even `n`).
#[derive(Clone, Debug, Serialize)]
pub struct EvenSpaceReport {
    pub height: f64,
    pub dim: usize,
    /// `|conj(Π_ev) - Π_ev|`
    pub conjugation: f64,
    /// `max |Σ u_j v_j|` over a basis of `E_ev`.
    pub isotropy: f64,
    pub case: char,
    pub pass: bool,
}

pub fn even_space_report(ce: &CanonicalElement) -> EvenSpaceReport {
    let labels = ce.labels();
    let r = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pe = even_projector(ce);
    let conj = max_abs_c(&(pe.map(|z| z.conj()) - &pe));
    let mut cols: Vec<CVec> = Vec::new();
    for (e, j) in ce.eigenflag.iter().zip(&labels) {
        if parity_even(j + r) {
            cols.extend(e.basis.column_iter().map(|c| c.into_owned()));
        }
    }
    let mut iso: f64 = 0.0;
    for a in &cols {
        for b in &cols {
            iso = iso.max(sym(a, b).norm());
        }
    }
    let integer = (r - r.round()).abs() < 1e-9;
    let n = ce.n();
    let (case, pass) =
        if integer { ('a', conj < 1e-10) } else { ('b', n.is_multiple_of(2) && cols.len() == n / 2 && iso < 1e-10) };
    EvenSpaceReport { height: r, dim: cols.len(), conjugation: conj, isotropy: iso, case, pass }
}

/// `g_{±2}` part of `∂_v ξ` for the flag lift `ξ = i(Π_τ' - Π_τ'')`, the
/// grading being that of `ξ(p)`: `Π_τ' X Π_τ''` and `Π_τ'' X Π_τ'`.
pub fn lift_grading_residual(s: &Sampled) -> Result<f64> {
    let vals = s.grid.exec.try_map(&s.points, |lg| -> Result<f64> {
        let fp = complex_gauss(lg, f64::INFINITY)?;
        let p1 = &fp.tau1 * fp.tau1.adjoint();
        let p2 = &fp.tau2 * fp.tau2.adjoint();
        let sg = tau1_generators(lg);
        let m = lg.dim() / 2;
        let mut worst: f64 = 0.0;
        for v in 0..lg.dim() {
            let bv = lg.basis(v);
            let ds = CMat::from_columns(&(0..m).map(|k| lg.d2_c(&bv, &lg.holo(2 * k))).collect::<Vec<_>>());
            let dp1 = column_projector_derivative(&sg, &ds).ok_or(Error::SingularMetric)?;
            let dxi = (&dp1 - dp1.map(|z| z.conj())) * I;
            worst = worst.max((&p1 * &dxi * &p2).norm()).max((&p2 * &dxi * &p1).norm());
        }
        Ok(worst)
    })?;
    Ok(crate::exec::sup(vals))
}

/// Canonical element of the flag lift at one point, `E_1 = τ'`, `E_0 = N`.
pub fn flag_lift_element(fp: &crate::gauss::FlagPoint) -> Result<CanonicalElement> {
    let e0 = fp.normal.map(|z| z.re);
    canonical_orthogonal(&[1.0], std::slice::from_ref(&fp.tau1), &e0)
}

/// Classification of an invariant block of a pair `(J, J̃)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BlockKind {
    PlusJ,
    MinusJ,
    Quaternionic,
}

#[derive(Clone, Debug)]
pub struct SplitBlock {
    pub kind: BlockKind,
    /// Orthonormal columns spanning the block.
    pub basis: RMat,
    /// `c` with `L² = -c² I` on the block.
    pub c: f64,
    /// `(J₁, J₂, J₃)` restricted to the block (ambient matrices vanishing off it).
    pub quaternionic: Option<(RMat, RMat, RMat)>,
}

#[derive(Clone, Debug)]
pub struct ComplexStructureSplit {
    pub blocks: Vec<SplitBlock>,
    /// `|J̃ - reassembled|`
    pub reconstruction: f64,
    /// `max(|L² + A² + I|, |LA + AL|)`
    pub la_identities: f64,
    /// Square and anticommutation defects of the quaternionic blocks.
    pub block_identities: f64,
    pub warnings: Vec<String>,
}

/// Cluster tolerance for the eigenvalues of `L²`.
pub const SPLIT_CLUSTER: f64 = 1e-7;

fn validate_complex_structure(j: &RMat, name: &str) -> Result<()> {
    let d = j.nrows();
    if j.ncols() != d || !d.is_multiple_of(2) {
        return Err(Error::InvalidComplexStructure(format!("{name} is {}x{}", j.nrows(), j.ncols())));
    }
    let id = RMat::identity(d, d);
    let sq = max_abs(&(j * j + &id));
    let orth = max_abs(&(j.transpose() * j - &id));
    if sq > 1e-10 || orth > 1e-10 {
        return Err(Error::InvalidComplexStructure(format!("{name}: square defect {sq:.2e}, orthogonality {orth:.2e}")));
    }
    Ok(())
}

/// Splits `R^{2m}` into blocks invariant under both complex structures:
/// `L = ½(J̃ - J J̃ J)` commutes with `J`, `A = ½(J̃ + J J̃ J)` anticommutes,
/// and the eigenspaces of `L²` carry either `J̃ = ±J` or a quaternionic
/// triple `(J, A/s, J A/s)` with `A² = -s²`.
pub fn split_two_complex_structures(j: &RMat, jt: &RMat) -> Result<ComplexStructureSplit> {
    validate_complex_structure(j, "J")?;
    validate_complex_structure(jt, "J~")?;
    let d = j.nrows();
    let id = RMat::identity(d, d);
    let l = (jt - j * jt * j) * 0.5;
    let a = (jt + j * jt * j) * 0.5;
    let la = max_abs(&(&l * &l + &a * &a + &id)).max(max_abs(&(&l * &a + &a * &l)));
    let l2 = &l * &l;
    let eig = (&l2 + l2.transpose()) * 0.5;
    let eig = eig.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut warnings = Vec::new();
    let mut blocks = Vec::new();
    let mut rebuilt = RMat::zeros(d, d);
    let mut block_id: f64 = 0.0;
    for (s0, e0) in cluster_sorted(&vals, SPLIT_CLUSTER) {
        let spread = vals[e0 - 1] - vals[s0];
        if spread > 1e-10 {
            warnings.push(format!("merged eigenvalues of L^2 spanning {spread:.2e}"));
        }
        let w = RMat::from_columns(&order[s0..e0].iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect::<Vec<_>>());
        let pw = &w * w.transpose();
        let c2 = -vals[s0..e0].iter().sum::<f64>() / (e0 - s0) as f64;
        let c = c2.max(0.0).sqrt();
        let s2 = (1.0 - c2).max(0.0);
        if s2 < 1e-12 {
            // A vanishes here; J̃ = L commutes with J and -J J̃ is an involution
            let inv = -(j * jt);
            let restricted = w.transpose() * &inv * &w;
            let sym_r = (&restricted + restricted.transpose()) * 0.5;
            let e = sym_r.symmetric_eigen();
            for (sign, kind) in [(1.0, BlockKind::PlusJ), (-1.0, BlockKind::MinusJ)] {
                let cols: Vec<_> = (0..e.eigenvalues.len())
                    .filter(|&k| (e.eigenvalues[k] - sign).abs() < 0.5)
                    .map(|k| &w * e.eigenvectors.column(k))
                    .collect();
                if cols.is_empty() {
                    continue;
                }
                let basis = RMat::from_columns(&cols);
                let pb = &basis * basis.transpose();
                rebuilt += &pb * j * &pb * sign;
                blocks.push(SplitBlock { kind, basis, c, quaternionic: None });
            }
        } else {
            let s = s2.sqrt();
            let j1 = &pw * j * &pw;
            let j2 = &pw * &a * &pw / s;
            let j3 = &j1 * &j2;
            for q in [&j1, &j2, &j3] {
                block_id = block_id.max(max_abs(&(q * q + &pw)));
            }
            block_id = block_id.max(max_abs(&(&j1 * &j2 + &j2 * &j1)));
            rebuilt += &pw * &l * &pw + &j2 * s;
            blocks.push(SplitBlock { kind: BlockKind::Quaternionic, basis: w, c, quaternionic: Some((j1, j2, j3)) });
        }
    }
    let reconstruction = max_abs(&(jt - rebuilt));
    Ok(ComplexStructureSplit { blocks, reconstruction, la_identities: la, block_identities: block_id, warnings })
}

/// `Q J₀ Qᵀ` for a Haar-random orthogonal `Q`.
pub fn random_complex_structure<R: Rng>(d: usize, rng: &mut R) -> RMat {
    let q = random_orthogonal(d, rng);
    &q * crate::linalg::standard_j(d) * q.transpose()
}

pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> RMat {
    use rand_distr::StandardNormal;
    let g = RMat::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// One row per composition of `n` into at least two positive parts.
pub fn unitary_profiles(n: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            if cur.len() >= 2 {
                out.push(cur.clone());
            }
            return;
        }
        for k in 1..=rest {
            cur.push(k);
            rec(rest - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), &mut out);
    out
}

/// Orthogonal profiles `(d_1, ..., d_r; d_0)` with every `d_j ≥ 1` and
/// `d_0 ≥ 1`, `2 Σ d_j + d_0 = n`.
pub fn orthogonal_profiles(n: usize, r: usize) -> Vec<(Vec<usize>, usize)> {
    let mut out = Vec::new();
    for dims in unitary_like(r, n / 2) {
        let used: usize = 2 * dims.iter().sum::<usize>();
        if used < n {
            out.push((dims, n - used));
        }
    }
    out
}

/// Half-integer profiles `(d_{1/2}, ..., d_{r})` with `2 Σ d_j = n`.
pub fn half_integer_profiles(n: usize, levels: usize) -> Vec<Vec<usize>> {
    if !n.is_multiple_of(2) {
        return Vec::new();
    }
    unitary_like(levels, n / 2).into_iter().filter(|d| d.iter().sum::<usize>() == n / 2).collect()
}

/// All `r`-tuples of positive integers with sum at most `max`.
fn unitary_like(r: usize, max: usize) -> Vec<Vec<usize>> {
    fn rec(r: usize, budget: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for k in 1..=budget {
            cur.push(k);
            rec(r, budget - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(r, max, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Grid, JetMode};
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_unitary(vals: &[f64]) -> CanonicalElement {
        let n = vals.len();
        let xi = CMat::from_fn(n, n, |i, j| if i == j { C64::new(0.0, vals[i]) } else { C64::new(0.0, 0.0) });
        CanonicalElement::from_matrix(Algebra::Unitary(n), xi).unwrap()
    }

    #[test]
    fn unitary_example_grading() {
        let ce = canonical_unitary(&[1, 2], None, 0.0).unwrap();
        let expect = CMat::from_diagonal(&CVec::from_vec(vec![I, I * 2.0, I * 2.0]));
        assert!(max_abs_c(&(&ce.xi - expect)) < 1e-15);
        let gr = grade(&ce).unwrap();
        assert!(gr.c1);
        assert_eq!(gr.profile(), vec![(-1, 2), (0, 5), (1, 2)]);
        assert_eq!(gr.total_dim(), 9);
        assert!(a3_residual(&ce, &gr) < 1e-12);
        let gen = generation_check(&gr);
        assert!(gen.pass && gen.closure_dim == 8 && gen.with_center == 9, "{gen:?}");
        let shifted = grade(&canonical_unitary(&[1, 2], None, 0.37).unwrap()).unwrap();
        assert_eq!(shifted.profile(), gr.profile());
        assert_eq!(superhorizontal_space(&gr).holomorphic_tangent.len(), 2);
        let cs = cartan_split(&ce, &gr);
        assert!(cs.relations < 1e-10 && cs.a4 < 1e-10);
        assert_eq!(cs.dim_k + cs.dim_p, 9);
    }

    #[test]
    fn c1_and_c2_counterexamples() {
        let half = grade(&diag_unitary(&[0.5, 2.0])).unwrap();
        assert!(!half.c1);
        let gap2 = grade(&diag_unitary(&[0.0, 0.0, 2.0, 2.0])).unwrap();
        assert!(gap2.c1);
        let gen = generation_check(&gap2);
        assert!(!gen.pass, "{gen:?}");
        let bad = CMat::from_fn(2, 2, |i, j| C64::new((i + j) as f64, 0.0));
        assert!(matches!(CanonicalElement::from_matrix(Algebra::Unitary(2), bad), Err(Error::NotInAlgebra { .. })));
    }

    #[test]
    fn orthogonal_example() {
        let ce = standard_orthogonal(4, &[1], 1.0, None).unwrap();
        let mut rot = RMat::zeros(4, 4);
        rot[(1, 0)] = 1.0;
        rot[(0, 1)] = -1.0;
        assert!(max_abs_c(&(&ce.xi - rot.map(|x| C64::new(x, 0.0)))) < 1e-15);
        assert_eq!(ce.eigenflag.iter().map(|e| (e.lambda, e.basis.ncols())).collect::<Vec<_>>(), vec![
            (-1.0, 1),
            (0.0, 2),
            (1.0, 1)
        ]);
        let gr = grade(&ce).unwrap();
        assert_eq!(gr.profile(), vec![(-2, 0), (-1, 2), (0, 2), (1, 2), (2, 0)]);
        assert_eq!(gr.dim(2.0), 0);
        assert!(generation_check(&gr).pass);
        let cs = cartan_split(&ce, &gr);
        assert_eq!((cs.dim_k, cs.dim_p), (2, 4));
        let sh = superhorizontal_space(&gr);
        assert_eq!(sh.horizontal.len(), 4);
        assert_eq!(sh.superhorizontal.len(), 2);
        assert!(sh.horizontal_is_superhorizontal);
        assert!(ce.conjugation_defect() < 1e-14);
    }

    #[test]
    fn orthogonal_frames_must_be_isotropic() {
        let mut f = CMat::zeros(4, 1);
        f[(0, 0)] = C64::new(1.0, 0.0);
        let e0 = RMat::from_columns(&[
            crate::linalg::RVec::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
            crate::linalg::RVec::from_vec(vec![0.0, 0.0, 1.0, 0.0]),
        ]);
        assert!(matches!(canonical_orthogonal(&[1.0], &[f], &e0), Err(Error::ConjugationSymmetry { .. })));
    }

    #[test]
    fn profile_enumeration() {
        assert_eq!(unitary_profiles(3), vec![vec![1, 1, 1], vec![1, 2], vec![2, 1]]);
        assert_eq!(unitary_profiles(4).len(), 7);
        assert_eq!(orthogonal_profiles(4, 1), vec![(vec![1], 2)]);
        assert_eq!(orthogonal_profiles(5, 2), vec![(vec![1, 1], 1)]);
        assert_eq!(orthogonal_profiles(6, 1), vec![(vec![1], 4), (vec![2], 2)]);
        assert_eq!(half_integer_profiles(6, 2), vec![vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn lift_grading_vanishes_for_kaehler_fixtures() {
        for imm in [fixtures::plane(), fixtures::sphere(), fixtures::veronese()] {
            let s = Sampled::new(&imm, &Grid::interior(&imm.domain, 5), JetMode::Analytic, 1e-4).unwrap();
            let r = lift_grading_residual(&s).unwrap();
            assert!(r < 1e-5, "{} {r}", imm.name);
        }
    }

    #[test]
    fn flag_lift_block_projection_matches_grading() {
        let imm = fixtures::veronese();
        let lg = crate::local::LocalGeometry::at(&imm, &[0.1, 0.2], JetMode::Analytic, 1e-4).unwrap();
        let fp = complex_gauss(&lg, 1e-10).unwrap();
        let ce = flag_lift_element(&fp).unwrap();
        let gr = grade(&ce).unwrap();
        let x = CMat::from_fn(9, 9, |i, j| C64::new((i as f64 - 2.0 * j as f64).sin(), 0.0));
        let x = &x - x.transpose();
        let p1 = &fp.tau1 * fp.tau1.adjoint();
        let p2 = &fp.tau2 * fp.tau2.adjoint();
        let block = &p1 * &x * &p2;
        let g2 = gr.space(2.0).unwrap();
        let proj = g2.basis.iter().fold(CMat::zeros(9, 9), |acc, b| acc + b * frob_herm(&x, b));
        assert!(max_abs_c(&(proj - &block + block.transpose())) < 1e-12);
    }

    #[test]
    fn split_degenerate_and_quaternionic() {
        let j = crate::linalg::standard_j(4);
        let s = split_two_complex_structures(&j, &j).unwrap();
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].kind, BlockKind::PlusJ);
        let s = split_two_complex_structures(&j, &(-&j)).unwrap();
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].kind, BlockKind::MinusJ);
        // right multiplication by the quaternion j on H = R^4
        let jt = RMat::from_row_slice(4, 4, &[
            0.0, 0.0, -1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, 0.0,
        ]);
        assert!(max_abs(&(&j * &jt + &jt * &j)) < 1e-15);
        let s = split_two_complex_structures(&j, &jt).unwrap();
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].kind, BlockKind::Quaternionic);
        let (j1, j2, j3) = s.blocks[0].quaternionic.clone().unwrap();
        assert!(max_abs(&(&j2 - &jt)) < 1e-12);
        assert!(max_abs(&(&j3 - &j * &jt)) < 1e-12);
        assert!(max_abs(&(&j1 * &j2 + &j2 * &j1)) < 1e-12);
        assert!(s.reconstruction < 1e-12 && s.block_identities < 1e-12);
    }

    #[test]
    fn split_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 4, 6] {
            for _ in 0..20 {
                let j = random_complex_structure(d, &mut rng);
                let jt = random_complex_structure(d, &mut rng);
                let s = split_two_complex_structures(&j, &jt).unwrap();
                assert!(s.reconstruction < 1e-9 && s.block_identities < 1e-9 && s.la_identities < 1e-10, "{s:?}");
            }
        }
        assert!(split_two_complex_structures(&RMat::identity(2, 2), &RMat::identity(2, 2)).is_err());
    }
}
