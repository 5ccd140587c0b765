//! Pointwise extrinsic geometry assembled from a third-order jet.
//!
//! Everything here is computed in closed form from the jet: the induced
//! metric and its Christoffel symbols, the tangent projector and its
//! derivatives, the second fundamental form and its ambient, normal and
//! covariant derivatives.  Grid checks consume slices of [`LocalGeometry`].

use crate::chart::{eval_jet, pi_prime, pi_second, ChartedImmersion, Grid, Jet3, JetMode};
use crate::error::Result;
use crate::kaehler::{induced_metric, MetricData};
use crate::linalg::{complexify_vec, standard_j, CMat, CVec, RMat, RVec, C64};

/// Dense array of values indexed by two chart indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Form2<T> {
    pub d: usize,
    data: Vec<T>,
}

impl<T: Clone> Form2<T> {
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(f(i, j));
            }
        }
        Form2 { d, data }
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.d + j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }
}

/// Dense array of values indexed by three chart indices `(k, i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Form3<T> {
    pub d: usize,
    data: Vec<T>,
}

impl<T: Clone> Form3<T> {
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(d * d * d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    data.push(f(k, i, j));
                }
            }
        }
        Form3 { d, data }
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> &T {
        &self.data[(k * self.d + i) * self.d + j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }
}

#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub point: Vec<f64>,
    pub jet: Jet3,
    pub metric: MetricData,
    pub j: RMat,
    /// Orthogonal projector `P` onto `df(T_pM)`.
    pub tangent_projector: RMat,
    pub normal_projector: RMat,
    /// `∂_k P`.
    pub dprojector: Vec<RMat>,
    /// `α(∂_i, ∂_j)`.
    pub alpha: Form2<RVec>,
    /// Ambient derivative `∂_k (α(∂_i, ∂_j))`, indexed `(k, i, j)`.
    pub dalpha_ambient: Form3<RVec>,
    /// Covariant derivative `(D_k α)(∂_i, ∂_j)`, indexed `(k, i, j)`.
    pub dalpha: Form3<RVec>,
    /// Columns `π'(∂_i)` of the (1,0) projection.
    pub pi1: CMat,
}

impl LocalGeometry {
    pub fn at(imm: &ChartedImmersion, p: &[f64], mode: JetMode, h: f64) -> Result<Self> {
        let jet = eval_jet(imm, p, mode, h)?;
        Self::from_jet(p.to_vec(), jet)
    }

    pub fn from_jet(point: Vec<f64>, jet: Jet3) -> Result<Self> {
        let d = jet.dim;
        let n = jet.n();
        let metric = induced_metric(&jet)?;
        let df = jet.differential();
        let gi = &metric.g_inv;
        let p = &df * gi * df.transpose();
        let q = RMat::identity(n, n) - &p;

        let dprojector: Vec<RMat> = (0..d)
            .map(|k| {
                let ddf = RMat::from_columns(&(0..d).map(|i| jet.d2(i, k).clone()).collect::<Vec<_>>());
                let dg = ddf.transpose() * &df + df.transpose() * &ddf;
                let dgi = -(gi * dg * gi);
                &ddf * gi * df.transpose() + &df * gi * ddf.transpose() + &df * dgi * df.transpose()
            })
            .collect();

        let alpha = Form2::from_fn(d, |i, j| &q * jet.d2(i, j));
        let dalpha_ambient =
            Form3::from_fn(d, |k, i, j| &q * jet.d3(i, j, k) - &dprojector[k] * jet.d2(i, j));
        let gamma = |l: usize, i: usize, j: usize| metric.gamma(l, i, j);
        // D^N_k α_ij = (I - P) d3_ijk - Σ_l Γ^l_ij α_kl
        let normal_part = Form3::from_fn(d, |k, i, j| {
            let mut v = &q * jet.d3(i, j, k);
            for l in 0..d {
                v -= alpha.get(k, l) * gamma(l, i, j);
            }
            v
        });
        let dalpha = Form3::from_fn(d, |k, i, j| {
            let mut v = normal_part.get(k, i, j).clone();
            for l in 0..d {
                v -= alpha.get(l, j) * gamma(l, k, i);
                v -= alpha.get(i, l) * gamma(l, k, j);
            }
            v
        });
        Ok(LocalGeometry {
            point,
            jet,
            metric,
            j: standard_j(d),
            tangent_projector: p,
            normal_projector: q,
            dprojector,
            alpha,
            dalpha_ambient,
            dalpha,
            pi1: pi_prime(d),
        })
    }

    pub fn dim(&self) -> usize {
        self.jet.dim
    }

    pub fn n(&self) -> usize {
        self.jet.n()
    }

    pub fn pi2(&self) -> CMat {
        pi_second(self.dim())
    }

    /// Complex-bilinear extension `α(u, v)`.
    pub fn alpha_c(&self, u: &CVec, v: &CVec) -> CVec {
        bilinear(&self.alpha, u, v, self.n())
    }

    /// `(D_w α)(u, v)`, complex-trilinear.
    pub fn dalpha_c(&self, w: &CVec, u: &CVec, v: &CVec) -> CVec {
        trilinear(&self.dalpha, w, u, v, self.n())
    }

    /// Ambient derivative `∂_w (α(u, v))` for constant coefficient vectors.
    pub fn dalpha_ambient_c(&self, w: &CVec, u: &CVec, v: &CVec) -> CVec {
        trilinear(&self.dalpha_ambient, w, u, v, self.n())
    }

    /// `df(u)` for a complex tangent vector.
    pub fn df_c(&self, u: &CVec) -> CVec {
        let mut out = CVec::zeros(self.n());
        for (i, ui) in u.iter().enumerate() {
            if *ui != C64::new(0.0, 0.0) {
                out += complexify_vec(&self.jet.d1[i]) * *ui;
            }
        }
        out
    }

    /// `∂_w (df(u)) = d2(w, u)` for constant coefficient vectors.
    pub fn d2_c(&self, w: &CVec, u: &CVec) -> CVec {
        let n = self.n();
        let mut out = CVec::zeros(n);
        for (k, wk) in w.iter().enumerate() {
            for (i, ui) in u.iter().enumerate() {
                let c = wk * ui;
                if c != C64::new(0.0, 0.0) {
                    out += complexify_vec(self.jet.d2(k, i)) * c;
                }
            }
        }
        out
    }

    /// `π'(∂_a)` for the `a`-th real chart direction.
    pub fn holo(&self, a: usize) -> CVec {
        self.pi1.column(a).into_owned()
    }

    pub fn antiholo(&self, a: usize) -> CVec {
        self.pi1.column(a).map(|z| z.conj())
    }

    pub fn basis(&self, a: usize) -> CVec {
        CVec::from_fn(self.dim(), |i, _| C64::new(if i == a { 1.0 } else { 0.0 }, 0.0))
    }
}

fn bilinear(form: &Form2<RVec>, u: &CVec, v: &CVec, n: usize) -> CVec {
    let d = form.d;
    let mut out = CVec::zeros(n);
    for i in 0..d {
        if u[i] == C64::new(0.0, 0.0) {
            continue;
        }
        for j in 0..d {
            let c = u[i] * v[j];
            if c != C64::new(0.0, 0.0) {
                out += complexify_vec(form.get(i, j)) * c;
            }
        }
    }
    out
}

fn trilinear(form: &Form3<RVec>, w: &CVec, u: &CVec, v: &CVec, n: usize) -> CVec {
    let d = form.d;
    let mut out = CVec::zeros(n);
    for k in 0..d {
        if w[k] == C64::new(0.0, 0.0) {
            continue;
        }
        for i in 0..d {
            let wu = w[k] * u[i];
            if wu == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                let c = wu * v[j];
                if c != C64::new(0.0, 0.0) {
                    out += complexify_vec(form.get(k, i, j)) * c;
                }
            }
        }
    }
    out
}

/// Pointwise geometry on every grid point, evaluated with `grid.exec`.
#[derive(Clone, Debug)]
pub struct Sampled {
    pub grid: Grid,
    pub points: Vec<LocalGeometry>,
}

impl Sampled {
    pub fn new(imm: &ChartedImmersion, grid: &Grid, mode: JetMode, h: f64) -> Result<Self> {
        let pts = grid.points();
        let points = grid.exec.try_map(&pts, |p| LocalGeometry::at(imm, p, mode, h))?;
        Ok(Sampled { grid: grid.clone(), points })
    }

    /// Supremum of a pointwise quantity, evaluated in parallel when enabled.
    pub fn sup<F>(&self, f: F) -> f64
    where
        F: Fn(&LocalGeometry) -> f64 + Sync + Send,
    {
        crate::exec::sup(self.grid.exec.map(&self.points, f))
    }
}
