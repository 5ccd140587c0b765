//! Charted immersions, third-order jets and complexified tangent vectors.
//!
//! Chart coordinates are ordered `(x1, y1, ..., xm, ym)` and the complex
//! structure is the constant block matrix with `J ∂x_k = ∂y_k`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{numerical_rank, standard_j, CVec, RMat, RVec, C64};

pub const DEFAULT_H: f64 = 1e-4;
pub const RANK_TOL: f64 = 1e-9;

/// Axis-aligned box in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b), "empty domain box");
        DomainBox { lo, hi }
    }

    /// The same interval on every axis.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        DomainBox::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    /// Distance to the nearest face (negative outside).
    pub fn margin(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (a, b))| (x - a).min(b - x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Value and partial derivatives up to order three at a chart point.
///
/// `d2` and `d3` are stored densely; constructors fill only sorted index
/// tuples and copy, so symmetry holds exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet3 {
    pub dim: usize,
    pub value: RVec,
    pub d1: Vec<RVec>,
    d2: Vec<RVec>,
    d3: Vec<RVec>,
    /// Largest deviation from finite differences, recorded in [`JetMode::Both`].
    pub fd_deviation: Option<f64>,
}

impl Jet3 {
    pub fn from_fn<F1, F2, F3>(value: RVec, dim: usize, d1: F1, d2: F2, d3: F3) -> Self
    where
        F1: Fn(usize) -> RVec,
        F2: Fn(usize, usize) -> RVec,
        F3: Fn(usize, usize, usize) -> RVec,
    {
        let n = value.len();
        let d1v: Vec<RVec> = (0..dim).map(&d1).collect();
        let mut d2v = vec![RVec::zeros(n); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = d2(i, j);
                d2v[i * dim + j] = v.clone();
                d2v[j * dim + i] = v;
            }
        }
        let mut d3v = vec![RVec::zeros(n); dim * dim * dim];
        for i in 0..dim {
            for j in i..dim {
                for k in j..dim {
                    let v = d3(i, j, k);
                    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        d3v[(a * dim + b) * dim + c] = v.clone();
                    }
                }
            }
        }
        Jet3 { dim, value, d1: d1v, d2: d2v, d3: d3v, fd_deviation: None }
    }

    pub fn n(&self) -> usize {
        self.value.len()
    }

    pub fn d2(&self, i: usize, j: usize) -> &RVec {
        &self.d2[i * self.dim + j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> &RVec {
        &self.d3[(i * self.dim + j) * self.dim + k]
    }

    /// The differential as an `n x 2m` matrix.
    pub fn differential(&self) -> RMat {
        RMat::from_columns(&self.d1)
    }

    /// Largest entrywise difference over all orders.
    pub fn max_deviation(&self, other: &Jet3) -> JetDeviation {
        let diff = |a: &[RVec], b: &[RVec]| a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
        JetDeviation {
            value: (&self.value - &other.value).amax(),
            d1: diff(&self.d1, &other.d1),
            d2: diff(&self.d2, &other.d2),
            d3: diff(&self.d3, &other.d3),
        }
    }

    /// Generic Leibniz rule for a bilinear map `b` applied to two jets.
    pub fn bilinear<B>(a: &Jet3, c: &Jet3, b: B) -> Jet3
    where
        B: Fn(&RVec, &RVec) -> RVec,
    {
        assert_eq!(a.dim, c.dim);
        let d = a.dim;
        Jet3::from_fn(
            b(&a.value, &c.value),
            d,
            |i| b(&a.d1[i], &c.value) + b(&a.value, &c.d1[i]),
            |i, j| b(a.d2(i, j), &c.value) + b(&a.d1[i], &c.d1[j]) + b(&a.d1[j], &c.d1[i]) + b(&a.value, c.d2(i, j)),
            |i, j, k| {
                b(a.d3(i, j, k), &c.value)
                    + b(a.d2(i, j), &c.d1[k])
                    + b(a.d2(i, k), &c.d1[j])
                    + b(a.d2(j, k), &c.d1[i])
                    + b(&a.d1[i], c.d2(j, k))
                    + b(&a.d1[j], c.d2(i, k))
                    + b(&a.d1[k], c.d2(i, j))
                    + b(&a.value, c.d3(i, j, k))
            },
        )
    }

    /// Jet of `(p, q) ↦ (f(p), g(q))` on a product of charts.
    pub fn product(a: &Jet3, b: &Jet3) -> Jet3 {
        let (da, db) = (a.dim, b.dim);
        let (na, nb) = (a.n(), b.n());
        let stack = |x: Option<&RVec>, y: Option<&RVec>| {
            let mut v = RVec::zeros(na + nb);
            if let Some(x) = x {
                v.rows_mut(0, na).copy_from(x);
            }
            if let Some(y) = y {
                v.rows_mut(na, nb).copy_from(y);
            }
            v
        };
        let side = |idx: &[usize]| -> Option<bool> {
            if idx.iter().all(|&i| i < da) {
                Some(true)
            } else if idx.iter().all(|&i| i >= da) {
                Some(false)
            } else {
                None
            }
        };
        Jet3::from_fn(
            stack(Some(&a.value), Some(&b.value)),
            da + db,
            |i| if i < da { stack(Some(&a.d1[i]), None) } else { stack(None, Some(&b.d1[i - da])) },
            |i, j| match side(&[i, j]) {
                Some(true) => stack(Some(a.d2(i, j)), None),
                Some(false) => stack(None, Some(b.d2(i - da, j - da))),
                None => RVec::zeros(na + nb),
            },
            |i, j, k| match side(&[i, j, k]) {
                Some(true) => stack(Some(a.d3(i, j, k)), None),
                Some(false) => stack(None, Some(b.d3(i - da, j - da, k - da))),
                None => RVec::zeros(na + nb),
            },
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JetDeviation {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

pub type EvalFn = Arc<dyn Fn(&[f64]) -> RVec + Send + Sync>;
pub type JetFn = Arc<dyn Fn(&[f64]) -> Jet3 + Send + Sync>;

/// An immersion `f: U ⊂ R^{2m} → R^n` given on a single box chart.
#[derive(Clone)]
pub struct ChartedImmersion {
    pub name: String,
    pub ambient_dim: usize,
    pub complex_dim: usize,
    pub domain: DomainBox,
    pub eval: EvalFn,
    pub analytic_jet: Option<JetFn>,
}

impl fmt::Debug for ChartedImmersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartedImmersion")
            .field("name", &self.name)
            .field("ambient_dim", &self.ambient_dim)
            .field("complex_dim", &self.complex_dim)
            .field("domain", &self.domain)
            .field("analytic_jet", &self.analytic_jet.is_some())
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JetMode {
    Analytic,
    Fd,
    Both,
}

impl ChartedImmersion {
    /// Real dimension `2m` of the chart.
    pub fn dim(&self) -> usize {
        2 * self.complex_dim
    }

    pub fn j(&self) -> RMat {
        standard_j(self.dim())
    }

    pub fn eval_at(&self, p: &[f64]) -> RVec {
        (self.eval)(p)
    }

    /// Same immersion with jets supplied by finite differences only.
    pub fn without_analytic_jets(&self) -> Self {
        let mut c = self.clone();
        c.analytic_jet = None;
        c
    }

    pub fn with_domain(&self, domain: DomainBox) -> Self {
        let mut c = self.clone();
        c.domain = domain;
        c
    }
}

/// Jet of `imm` at `p`.
///
/// `Analytic` falls back to finite differences when no analytic jet exists.
/// The differential is required to have full rank `2m`.
pub fn eval_jet(imm: &ChartedImmersion, p: &[f64], mode: JetMode, h: f64) -> Result<Jet3> {
    if !imm.domain.contains(p) {
        return Err(Error::OutsideDomain { point: p.to_vec() });
    }
    let jet = match (mode, &imm.analytic_jet) {
        (JetMode::Analytic, Some(jf)) => jf(p),
        (JetMode::Both, Some(jf)) => {
            let mut jet = jf(p);
            let fd = fd_jet_oracle(imm, p, h)?;
            let dev = jet.max_deviation(&fd);
            jet.fd_deviation = Some(dev.d1.max(dev.d2));
            jet
        }
        _ => fd_jet_oracle(imm, p, h)?,
    };
    check_rank(&jet)?;
    Ok(jet)
}

pub fn check_rank(jet: &Jet3) -> Result<()> {
    let rank = numerical_rank(&jet.differential(), RANK_TOL);
    if rank < jet.dim {
        return Err(Error::RankDeficient { rank, expected: jet.dim });
    }
    Ok(())
}

/// Third-derivative step used by [`fd_jet_oracle`]: a nested central stencil
/// divides round-off by `h^3`, so the step is kept at least `2e-3`.
pub fn third_order_step(h: f64) -> f64 {
    h.max(2e-3)
}

/// Central-difference jet from `eval` alone.
///
/// First and second derivatives use step `h`; third derivatives apply a
/// central difference to second-difference stencils with step
/// [`third_order_step`], then symmetrise.
pub fn fd_jet_oracle(imm: &ChartedImmersion, p: &[f64], h: f64) -> Result<Jet3> {
    let h3 = third_order_step(h);
    let margin = imm.domain.margin(p);
    if margin < 3.0 * h3.max(h) {
        return Err(Error::BoundaryProximity { point: p.to_vec(), margin: 3.0 * h3.max(h) });
    }
    let d = imm.dim();
    let f = |q: &[f64]| imm.eval_at(q);
    let shifted = |q: &[f64], i: usize, s: f64| {
        let mut r = q.to_vec();
        r[i] += s;
        r
    };
    let second = |q: &[f64], i: usize, j: usize, step: f64| -> RVec {
        if i == j {
            (f(&shifted(q, i, step)) - f(q) * 2.0 + f(&shifted(q, i, -step))) / (step * step)
        } else {
            let pp = shifted(&shifted(q, i, step), j, step);
            let pm = shifted(&shifted(q, i, step), j, -step);
            let mp = shifted(&shifted(q, i, -step), j, step);
            let mm = shifted(&shifted(q, i, -step), j, -step);
            (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * step * step)
        }
    };
    let third_raw = |i: usize, j: usize, k: usize| -> RVec {
        (second(&shifted(p, k, h3), i, j, h3) - second(&shifted(p, k, -h3), i, j, h3)) / (2.0 * h3)
    };
    Ok(Jet3::from_fn(
        f(p),
        d,
        |i| (f(&shifted(p, i, h)) - f(&shifted(p, i, -h))) / (2.0 * h),
        |i, j| second(p, i, j, h),
        |i, j, k| (third_raw(i, j, k) + third_raw(j, k, i) + third_raw(k, i, j)) / 3.0,
    ))
}

/// Tensor-product sample grid in chart coordinates, row-major with the first
/// axis slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub axes: Vec<Vec<f64>>,
    pub exec: Exec,
}

impl Grid {
    /// `n` interior points per axis: `lo + (i+1)/(n+1) (hi - lo)`.
    pub fn interior(domain: &DomainBox, n: usize) -> Self {
        let axes = (0..domain.dim())
            .map(|a| {
                let (lo, hi) = (domain.lo[a], domain.hi[a]);
                (0..n).map(|i| lo + (i + 1) as f64 / (n + 1) as f64 * (hi - lo)).collect()
            })
            .collect();
        Grid { axes, exec: Exec::default() }
    }

    /// `n` points per axis including both faces.
    pub fn inclusive(domain: &DomainBox, n: usize) -> Self {
        assert!(n >= 2);
        let axes = (0..domain.dim())
            .map(|a| {
                let (lo, hi) = (domain.lo[a], domain.hi[a]);
                (0..n).map(|i| lo + i as f64 / (n - 1) as f64 * (hi - lo)).collect()
            })
            .collect();
        Grid { axes, exec: Exec::default() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for a in (0..shape.len()).rev() {
            idx[a] = flat % shape[a];
            flat /= shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.shape()).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(a, &i)| self.axes[a][i]).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Spacing along an axis (uniform grids only).
    pub fn spacing(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        if a.len() < 2 {
            0.0
        } else {
            a[1] - a[0]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeTag {
    General,
    /// `J v = i v`
    Holomorphic,
    /// `J v = -i v`
    Antiholomorphic,
}

/// Complexified tangent vector in the chart basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTangent {
    pub components: CVec,
    pub tag: TypeTag,
}

impl ComplexTangent {
    pub fn real(v: &RVec) -> Self {
        ComplexTangent { components: v.map(|x| C64::new(x, 0.0)), tag: TypeTag::General }
    }

    pub fn basis(d: usize, i: usize) -> Self {
        ComplexTangent::real(&RVec::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 }))
    }

    /// `J v` with the standard block structure.
    pub fn apply_j(&self) -> Self {
        let j = standard_j(self.components.len()).map(|x| C64::new(x, 0.0));
        ComplexTangent { components: j * &self.components, tag: self.tag }
    }
}

/// `π'(v) = ½(v - iJv)` for `(1,0)`, `π''(v) = ½(v + iJv)` for `(0,1)`.
pub fn project_type(v: &ComplexTangent, which: TypeTag) -> ComplexTangent {
    let jv = v.apply_j().components;
    let i = C64::new(0.0, 1.0);
    let half = C64::new(0.5, 0.0);
    match which {
        TypeTag::Holomorphic => ComplexTangent { components: (&v.components - jv * i) * half, tag: TypeTag::Holomorphic },
        TypeTag::Antiholomorphic => ComplexTangent { components: (&v.components + jv * i) * half, tag: TypeTag::Antiholomorphic },
        TypeTag::General => v.clone(),
    }
}

/// Matrix of `π'` on the real chart basis: column `i` is `π'(∂_i)`.
pub fn pi_prime(d: usize) -> crate::linalg::CMat {
    let j = standard_j(d);
    crate::linalg::CMat::from_fn(d, d, |r, c| {
        let id = if r == c { 0.5 } else { 0.0 };
        C64::new(id, -0.5 * j[(r, c)])
    })
}

/// Matrix of `π''`, the conjugate of [`pi_prime`].
pub fn pi_second(d: usize) -> crate::linalg::CMat {
    pi_prime(d).map(|z| z.conj())
}

/// Step pair used to measure the convergence order of the difference jets.
pub const ORDER_STEPS: (f64, f64) = (1e-2, 5e-3);
/// Deviations below this are treated as exact (polynomial charts).
const EXACT_FLOOR: f64 = 1e-10;

/// Analytic versus difference jets over a point set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JetConvergence {
    /// Deviation at the configured step.
    pub at_h: JetDeviation,
    pub coarse: JetDeviation,
    pub fine: JetDeviation,
    /// `log2(coarse/fine)`; `None` when the difference jet is exact.
    pub order_d1: Option<f64>,
    pub order_d2: Option<f64>,
}

impl JetConvergence {
    pub fn min_order(&self) -> Option<f64> {
        match (self.order_d1, self.order_d2) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

fn sup_deviation(devs: &[JetDeviation]) -> JetDeviation {
    let pick = |f: fn(&JetDeviation) -> f64| crate::exec::sup(devs.iter().map(f));
    JetDeviation { value: pick(|d| d.value), d1: pick(|d| d.d1), d2: pick(|d| d.d2), d3: pick(|d| d.d3) }
}

/// Compares analytic and difference jets at every point, at step `h` and
/// at the two [`ORDER_STEPS`].
pub fn jet_convergence(imm: &ChartedImmersion, points: &[Vec<f64>], h: f64, exec: Exec) -> Result<JetConvergence> {
    let Some(jf) = &imm.analytic_jet else {
        return Err(Error::Config(format!("fixture `{}` has no analytic jets", imm.name)));
    };
    let devs = exec.try_map(points, |p| -> Result<[JetDeviation; 3]> {
        let exact = jf(p);
        Ok([
            exact.max_deviation(&fd_jet_oracle(imm, p, h)?),
            exact.max_deviation(&fd_jet_oracle(imm, p, ORDER_STEPS.0)?),
            exact.max_deviation(&fd_jet_oracle(imm, p, ORDER_STEPS.1)?),
        ])
    })?;
    let col = |k: usize| sup_deviation(&devs.iter().map(|d| d[k]).collect::<Vec<_>>());
    let (at_h, coarse, fine) = (col(0), col(1), col(2));
    let ratio = (ORDER_STEPS.0 / ORDER_STEPS.1).log2();
    let order = |c: f64, f: f64| if c < EXACT_FLOOR { None } else { Some((c / f).log2() / ratio) };
    Ok(JetConvergence { at_h, coarse, fine, order_d1: order(coarse.d1, fine.d1), order_d2: order(coarse.d2, fine.d2) })
}
