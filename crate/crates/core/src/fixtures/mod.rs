//! The fixture zoo: explicit immersions with closed-form jets and a ledger of
//! the flags the verification pipeline is expected to reproduce.

mod ellipsoid;
mod file;
pub mod quadrature;
pub mod stereo;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use ellipsoid::ConfocalEllipsoid;
pub use file::{load_fixture_file, parse_fixture_file, FixtureDef};

use crate::chart::{ChartedImmersion, DomainBox, Jet3};
use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};

/// Expected classification; `None` means "not part of the ledger".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedFlags {
    pub kaehler: Option<bool>,
    pub ppmc: Option<bool>,
    pub pluriminimal: Option<bool>,
    pub half_isotropic: Option<bool>,
    pub isotropic: Option<bool>,
    pub spherical: Option<bool>,
}

impl ExpectedFlags {
    const fn all(k: bool, p: bool, pm: bool, hi: bool, iso: bool, sph: bool) -> Self {
        ExpectedFlags {
            kaehler: Some(k),
            ppmc: Some(p),
            pluriminimal: Some(pm),
            half_isotropic: Some(hi),
            isotropic: Some(iso),
            spherical: Some(sph),
        }
    }

    pub fn entries(&self) -> [(&'static str, Option<bool>); 6] {
        [
            ("kaehler", self.kaehler),
            ("ppmc", self.ppmc),
            ("pluriminimal", self.pluriminimal),
            ("half_isotropic", self.half_isotropic),
            ("isotropic", self.isotropic),
            ("spherical", self.spherical),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct FixtureRecord {
    pub name: String,
    pub immersion: ChartedImmersion,
    pub expected: ExpectedFlags,
    pub notes: String,
    /// Fixture obtained from this one by the associated family at θ = π/2.
    pub conjugate: Option<String>,
    /// Number of real chart dimensions of the first factor of a Riemannian
    /// product chart.
    pub product_split: Option<usize>,
    /// Centre of the sphere containing the image, when known in closed form.
    pub sphere_center: Option<RVec>,
}

fn immersion<E, J>(name: &str, n: usize, m: usize, domain: DomainBox, eval: E, jet: J) -> ChartedImmersion
where
    E: Fn(&[f64]) -> RVec + Send + Sync + 'static,
    J: Fn(&[f64]) -> Jet3 + Send + Sync + 'static,
{
    ChartedImmersion {
        name: name.to_string(),
        ambient_dim: n,
        complex_dim: m,
        domain,
        eval: Arc::new(eval),
        analytic_jet: Some(Arc::new(jet)),
    }
}

fn v(xs: &[f64]) -> RVec {
    RVec::from_vec(xs.to_vec())
}

fn zero3() -> RVec {
    RVec::zeros(3)
}

pub fn plane() -> ChartedImmersion {
    immersion(
        "plane",
        3,
        1,
        DomainBox::cube(2, -1.0, 1.0),
        |p| v(&[p[0], p[1], 0.0]),
        |p| {
            Jet3::from_fn(
                v(&[p[0], p[1], 0.0]),
                2,
                |i| if i == 0 { v(&[1.0, 0.0, 0.0]) } else { v(&[0.0, 1.0, 0.0]) },
                |_, _| zero3(),
                |_, _, _| zero3(),
            )
        },
    )
}

/// Affine but non-conformal chart of the plane: `J` is not orthogonal.
pub fn skewed_plane() -> ChartedImmersion {
    immersion(
        "skewed_plane",
        3,
        1,
        DomainBox::cube(2, -1.0, 1.0),
        |p| v(&[p[0] + 0.6 * p[1], p[1], 0.0]),
        |p| {
            Jet3::from_fn(
                v(&[p[0] + 0.6 * p[1], p[1], 0.0]),
                2,
                |i| if i == 0 { v(&[1.0, 0.0, 0.0]) } else { v(&[0.6, 1.0, 0.0]) },
                |_, _| zero3(),
                |_, _, _| zero3(),
            )
        },
    )
}

pub fn sphere() -> ChartedImmersion {
    immersion("sphere", 3, 1, DomainBox::cube(2, -0.8, 0.8), stereo::sigma, stereo::sigma_jet)
}

pub const ELLIPSOID_SEMI_AXES: [f64; 3] = [1.0, 1.3, 1.7];

pub fn ellipsoid() -> ChartedImmersion {
    let e = Arc::new(ConfocalEllipsoid::new(ELLIPSOID_SEMI_AXES, 1.35, 2.3));
    let e2 = e.clone();
    immersion(
        "ellipsoid",
        3,
        1,
        DomainBox::new(vec![-0.3, -0.45], vec![0.4, 0.45]),
        move |p| e.eval(p),
        move |p| e2.jet(p),
    )
}

fn trig_jet(theta: f64, a: &[f64]) -> (Jet3, Jet3) {
    // jets of cos(a·x) and sin(a·x) as one-component vectors
    let (c, s) = (theta.cos(), theta.sin());
    let d = a.len();
    let cj = Jet3::from_fn(
        v(&[c]),
        d,
        |i| v(&[-s * a[i]]),
        |i, j| v(&[-c * a[i] * a[j]]),
        |i, j, k| v(&[s * a[i] * a[j] * a[k]]),
    );
    let sj = Jet3::from_fn(
        v(&[s]),
        d,
        |i| v(&[c * a[i]]),
        |i, j| v(&[-s * a[i] * a[j]]),
        |i, j, k| v(&[-c * a[i] * a[j] * a[k]]),
    );
    (cj, sj)
}

pub fn cylinder() -> ChartedImmersion {
    let f = |p: &[f64]| v(&[p[0].cos(), p[0].sin(), p[1]]);
    immersion("cylinder", 3, 1, DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]), f, move |p| {
        let (c, s) = (p[0].cos(), p[0].sin());
        let pick = |n_u: usize, n_v: usize| -> RVec {
            if n_v == 0 {
                let (dc, ds) = match n_u % 4 {
                    1 => (-s, c),
                    2 => (-c, -s),
                    3 => (s, -c),
                    _ => (c, s),
                };
                v(&[dc, ds, 0.0])
            } else if n_v == 1 && n_u == 0 {
                v(&[0.0, 0.0, 1.0])
            } else {
                zero3()
            }
        };
        let count = |idx: &[usize]| {
            let nv = idx.iter().filter(|&&i| i == 1).count();
            pick(idx.len() - nv, nv)
        };
        Jet3::from_fn(f(p), 2, |i| count(&[i]), |i, j| count(&[i, j]), |i, j, k| count(&[i, j, k]))
    })
}

/// Jets of `(cosh u cos v, cosh u sin v, u)` (catenoid) or
/// `(sinh u cos v, sinh u sin v, v)` (helicoid).
fn minimal_pair(helicoid: bool) -> ChartedImmersion {
    let f = move |p: &[f64]| {
        if helicoid {
            v(&[p[0].sinh() * p[1].cos(), p[0].sinh() * p[1].sin(), p[1]])
        } else {
            v(&[p[0].cosh() * p[1].cos(), p[0].cosh() * p[1].sin(), p[0]])
        }
    };
    let name = if helicoid { "helicoid" } else { "catenoid" };
    immersion(name, 3, 1, DomainBox::new(vec![-1.0, -1.5], vec![1.0, 1.5]), f, move |p| {
        let (u, w) = (p[0], p[1]);
        let du = |k: usize| {
            // k-th derivative of cosh (catenoid) or sinh (helicoid)
            if k.is_multiple_of(2) != helicoid {
                u.cosh()
            } else {
                u.sinh()
            }
        };
        let dv_cos = |k: usize| match k % 4 {
            0 => w.cos(),
            1 => -w.sin(),
            2 => -w.cos(),
            _ => w.sin(),
        };
        let dv_sin = |k: usize| match k % 4 {
            0 => w.sin(),
            1 => w.cos(),
            2 => -w.sin(),
            _ => -w.cos(),
        };
        let entry = |idx: &[usize]| {
            let nv = idx.iter().filter(|&&i| i == 1).count();
            let nu = idx.len() - nv;
            let third = if helicoid {
                if nu == 0 && nv == 1 {
                    1.0
                } else {
                    0.0
                }
            } else if nv == 0 && nu == 1 {
                1.0
            } else {
                0.0
            };
            v(&[du(nu) * dv_cos(nv), du(nu) * dv_sin(nv), third])
        };
        Jet3::from_fn(f(p), 2, |i| entry(&[i]), |i, j| entry(&[i, j]), |i, j, k| entry(&[i, j, k]))
    })
}

pub fn catenoid() -> ChartedImmersion {
    minimal_pair(false)
}

pub fn helicoid() -> ChartedImmersion {
    minimal_pair(true)
}

/// `z ↦ (z, z²)` in `C² = R⁴`.
pub fn holomorphic_curve() -> ChartedImmersion {
    let f = |p: &[f64]| v(&[p[0], p[1], p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]]);
    immersion("holomorphic_curve", 4, 1, DomainBox::cube(2, -1.0, 1.0), f, move |p| {
        let (x, y) = (p[0], p[1]);
        Jet3::from_fn(
            f(p),
            2,
            |i| if i == 0 { v(&[1.0, 0.0, 2.0 * x, 2.0 * y]) } else { v(&[0.0, 1.0, -2.0 * y, 2.0 * x]) },
            |i, j| match (i, j) {
                (0, 0) => v(&[0.0, 0.0, 2.0, 0.0]),
                (1, 1) => v(&[0.0, 0.0, -2.0, 0.0]),
                _ => v(&[0.0, 0.0, 0.0, 2.0]),
            },
            |_, _, _| RVec::zeros(4),
        )
    })
}

pub fn sphere_product() -> ChartedImmersion {
    let f = |p: &[f64]| {
        let a = stereo::sigma(&p[0..2]);
        let b = stereo::sigma(&p[2..4]);
        RVec::from_iterator(6, a.iter().chain(b.iter()).cloned())
    };
    immersion("sphere_product", 6, 2, DomainBox::cube(4, -0.8, 0.8), f, |p| {
        Jet3::product(&stereo::sigma_jet(&p[0..2]), &stereo::sigma_jet(&p[2..4]))
    })
}

/// Rows of a fixed orthogonal matrix mixing the two complex factors.
pub fn twisted_torus_frequencies() -> RMat {
    let seed = RMat::from_row_slice(4, 4, &[1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 3.0, -1.0, 2.0, -1.0, 1.0, 1.0, 1.0, 0.0, -1.0, 2.0]);
    let q = seed.transpose().qr().q();
    q.transpose()
}

/// Flat `R⁴ = C²` mapped into a product of four circles along mixed
/// directions: `x ↦ (cos⟨a_k,x⟩, sin⟨a_k,x⟩)_k` with orthonormal `a_k`.
/// Isometric, extrinsically non-split.
pub fn twisted_torus() -> ChartedImmersion {
    let a = twisted_torus_frequencies();
    let a2 = a.clone();
    let phase = move |a: &RMat, p: &[f64], k: usize| (0..4).map(|i| a[(k, i)] * p[i]).sum::<f64>();
    let f = move |p: &[f64]| {
        RVec::from_iterator(
            8,
            (0..4).flat_map(|k| {
                let t = phase(&a, p, k);
                [t.cos(), t.sin()]
            }),
        )
    };
    immersion("twisted_torus", 8, 2, DomainBox::cube(4, -0.6, 0.6), f, move |p| {
        let parts: Vec<(Jet3, Jet3)> =
            (0..4).map(|k| trig_jet(phase(&a2, p, k), &a2.row(k).iter().cloned().collect::<Vec<_>>())).collect();
        let gather = |sel: &dyn Fn(&Jet3) -> f64| RVec::from_iterator(8, parts.iter().flat_map(|(c, s)| [sel(c), sel(s)]));
        Jet3::from_fn(
            gather(&|j| j.value[0]),
            4,
            |i| gather(&|j| j.d1[i][0]),
            |i, k| gather(&|j| j.d2(i, k)[0]),
            |i, k, l| gather(&|j| j.d3(i, k, l)[0]),
        )
    })
}

/// `x ↦ x xᵀ` on the unit sphere, as symmetric 3x3 matrices in `R⁹` with
/// the Frobenius product.  The image lies in the trace-one affine slice.
pub fn veronese() -> ChartedImmersion {
    let f = |p: &[f64]| {
        let s = stereo::sigma(p);
        stereo::outer_flat(&s, &s)
    };
    immersion("veronese", 9, 1, DomainBox::cube(2, -0.8, 0.8), f, |p| {
        let s = stereo::sigma_jet(p);
        Jet3::bilinear(&s, &s, stereo::outer_flat)
    })
}

/// `p ↦ J_p = p̂`, the rotation by a right angle about `p`, in the skew
/// 3x3 matrices inside `R⁹`.
pub fn standard_embedding() -> ChartedImmersion {
    let f = |p: &[f64]| stereo::hat_flat(&stereo::sigma(p));
    immersion("standard_embedding", 9, 1, DomainBox::cube(2, -0.8, 0.8), f, |p| {
        stereo::map_linear(&stereo::sigma_jet(p), stereo::hat_flat)
    })
}

/// Chart identifiers accepted in fixture definition files.
pub const CHART_IDS: [&str; 12] = [
    "plane",
    "skewed_plane",
    "sphere",
    "ellipsoid",
    "cylinder",
    "catenoid",
    "helicoid",
    "holomorphic_curve",
    "sphere_product",
    "twisted_torus",
    "veronese",
    "standard_embedding",
];

pub fn chart_by_id(id: &str) -> Option<ChartedImmersion> {
    Some(match id {
        "plane" => plane(),
        "skewed_plane" => skewed_plane(),
        "sphere" => sphere(),
        "ellipsoid" => ellipsoid(),
        "cylinder" => cylinder(),
        "catenoid" => catenoid(),
        "helicoid" => helicoid(),
        "holomorphic_curve" => holomorphic_curve(),
        "sphere_product" => sphere_product(),
        "twisted_torus" => twisted_torus(),
        "veronese" => veronese(),
        "standard_embedding" => standard_embedding(),
        _ => return None,
    })
}

fn record(imm: ChartedImmersion, expected: ExpectedFlags, notes: &str) -> FixtureRecord {
    FixtureRecord {
        name: imm.name.clone(),
        immersion: imm,
        expected,
        notes: notes.to_string(),
        conjugate: None,
        product_split: None,
        sphere_center: None,
    }
}

/// The built-in fixtures in a fixed order.
pub fn registry() -> Vec<FixtureRecord> {
    use ExpectedFlags as E;
    let mut out = vec![
        record(plane(), E::all(true, true, true, true, true, false), "affine: every form vanishes"),
        FixtureRecord {
            sphere_center: Some(RVec::zeros(3)),
            ..record(sphere(), E::all(true, true, false, true, true, true), "alpha = -<.,.> f, umbilic, radius 1")
        },
        record(
            ellipsoid(),
            E::all(true, false, false, false, false, false),
            "semi-axes (1, 1.3, 1.7) in confocal conformal coordinates; negative control",
        ),
        record(cylinder(), E::all(true, true, false, false, false, false), "constant mean curvature 1/2, not umbilic"),
        FixtureRecord {
            conjugate: Some("helicoid".into()),
            ..record(catenoid(), E::all(true, true, true, true, false, false), "minimal; metric cosh^2 u |dw|^2")
        },
        FixtureRecord {
            conjugate: Some("catenoid".into()),
            ..record(helicoid(), E::all(true, true, true, true, false, false), "conjugate of the catenoid")
        },
        record(
            holomorphic_curve(),
            E::all(true, true, true, true, true, false),
            "complex curve z -> (z, z^2); alpha^(1,1) = 0, N' = normal (1,0) space",
        ),
        FixtureRecord {
            product_split: Some(2),
            sphere_center: Some(RVec::zeros(6)),
            ..record(
                sphere_product(),
                E::all(true, true, false, true, true, true),
                "S2 x S2 in R6; kappa = 1/2, centre 0, radius sqrt 2",
            )
        },
        FixtureRecord {
            product_split: Some(2),
            sphere_center: Some(RVec::zeros(8)),
            ..record(
                twisted_torus(),
                E::all(true, true, false, false, false, true),
                "flat C2 in a product of four circles along mixed directions; parallel alpha, radius 2",
            )
        },
        FixtureRecord {
            sphere_center: Some(identity_flat() / 3.0),
            ..record(
                veronese(),
                E::all(true, true, false, true, true, true),
                "x -> x x^T; extrinsic symmetric, centre I/3, radius sqrt(2/3)",
            )
        },
        FixtureRecord {
            sphere_center: Some(RVec::zeros(9)),
            ..record(
                standard_embedding(),
                E::all(true, true, false, true, true, true),
                "p -> J_p; alpha^(2,0) = 0, radius sqrt 2",
            )
        },
        record(
            skewed_plane(),
            ExpectedFlags { kaehler: Some(false), ..Default::default() },
            "non-conformal chart of the plane; J is not orthogonal",
        ),
    ];
    out.sort_by_key(|r| CHART_IDS.iter().position(|id| *id == r.name).unwrap_or(usize::MAX));
    out
}

fn identity_flat() -> RVec {
    RVec::from_fn(9, |r, _| if r % 4 == 0 { 1.0 } else { 0.0 })
}

pub fn find(name: &str) -> Result<FixtureRecord> {
    registry().into_iter().find(|r| r.name == name).ok_or_else(|| Error::UnknownFixture(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{eval_jet, fd_jet_oracle, JetMode};

    #[test]
    fn names_are_unique_and_resolvable() {
        let reg = registry();
        assert_eq!(reg.len(), CHART_IDS.len());
        for r in &reg {
            assert!(chart_by_id(&r.name).is_some());
            assert_eq!(find(&r.name).unwrap().name, r.name);
        }
        assert!(matches!(find("torus"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn catenoid_differential_at_origin() {
        let jet = eval_jet(&catenoid(), &[0.0, 0.0], JetMode::Analytic, 1e-4).unwrap();
        assert!((&jet.d1[0] - v(&[0.0, 0.0, 1.0])).amax() < 1e-15);
        assert!((&jet.d1[1] - v(&[0.0, 1.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn sphere_origin_is_south_pole() {
        let jet = eval_jet(&sphere(), &[0.0, 0.0], JetMode::Analytic, 1e-4).unwrap();
        assert!((&jet.value - v(&[0.0, 0.0, -1.0])).amax() < 1e-15);
        // normal component of d2 equals -g f with g = 4 at the origin
        let f = &jet.value;
        let n = jet.d2(0, 0).dot(f);
        assert!((n + 4.0).abs() < 1e-14);
    }

    #[test]
    fn analytic_jets_match_differences_on_every_fixture() {
        for r in registry() {
            let imm = &r.immersion;
            let d = imm.dim();
            let p: Vec<f64> = (0..d).map(|a| 0.5 * (imm.domain.lo[a] + imm.domain.hi[a]) + 0.07 * (a as f64 + 1.0)).collect();
            let an = eval_jet(imm, &p, JetMode::Analytic, 1e-4).unwrap();
            let fd = fd_jet_oracle(imm, &p, 1e-4).unwrap();
            let dev = an.max_deviation(&fd);
            assert!(dev.value < 1e-14, "{}: {:?}", r.name, dev);
            assert!(dev.d1 < 1e-7, "{}: {:?}", r.name, dev);
            assert!(dev.d2 < 1e-5, "{}: {:?}", r.name, dev);
            assert!(dev.d3 < 1e-3, "{}: {:?}", r.name, dev);
        }
    }

    #[test]
    fn veronese_lies_in_trace_one_slice() {
        let imm = veronese();
        let x = imm.eval_at(&[0.3, -0.2]);
        assert!((x[0] + x[4] + x[8] - 1.0).abs() < 1e-15);
    }
}
