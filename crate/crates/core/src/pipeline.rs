//! Verification runner: configuration, checks in dependency order, the
//! structured report and the flag-manifold and family demos.
//!
//! The report is a key-value tree serialised as JSON with sorted keys.
//! Fixtures run concurrently through [`Exec`]; within a fixture the checks
//! run in the order of [`Check::ALL`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::chart::{jet_convergence, ChartedImmersion, Grid, JetMode, DEFAULT_H};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::family::{self, FamilyMember, GaussLinkage, StructureResiduals};
use crate::fixtures::{self, ExpectedFlags, FixtureRecord};
use crate::flags::{self, Algebra, BlockKind, CanonicalElement, CartanSplit, EvenSpaceReport, GenerationReport};
use crate::forms::{self, MeanCurvatureData};
use crate::gauss;
use crate::kaehler::{self, CurvatureData};
use crate::linalg::{C64, CMat, RVec};
use crate::local::{LocalGeometry, Sampled};
use crate::status::{Status, Tier, Tolerances};

pub const TOOLKIT: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_GRID: usize = 9;
pub const MIN_GRID: usize = 5;
/// Minimum measured convergence order of the difference jets.
pub const MIN_ORDER: f64 = 1.9;
/// Cross pairs sampled by the product check.
pub const PRODUCT_PAIRS: usize = 50;

/// A named verification step.  Declaration order is execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    Kaehler,
    Jets,
    Curvature,
    Ppmc,
    Codazzi,
    Decomposition,
    NormalCurvature,
    Sublemma,
    Sphere,
    Product,
    Dgauss,
    GaussLevi,
    Superhorizontal,
    Holomorphic,
    HalfIsotropy,
    Isotropy,
    Chain,
    GaussSection,
    Structure,
    Closedness,
    Psi,
    LiftGrading,
}

impl Check {
    pub const ALL: [Check; 22] = [
        Check::Kaehler,
        Check::Jets,
        Check::Curvature,
        Check::Ppmc,
        Check::Codazzi,
        Check::Decomposition,
        Check::NormalCurvature,
        Check::Sublemma,
        Check::Sphere,
        Check::Product,
        Check::Dgauss,
        Check::GaussLevi,
        Check::Superhorizontal,
        Check::Holomorphic,
        Check::HalfIsotropy,
        Check::Isotropy,
        Check::Chain,
        Check::GaussSection,
        Check::Structure,
        Check::Closedness,
        Check::Psi,
        Check::LiftGrading,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Kaehler => "kaehler",
            Check::Jets => "jets",
            Check::Curvature => "curvature",
            Check::Ppmc => "ppmc",
            Check::Codazzi => "codazzi",
            Check::Decomposition => "decomposition",
            Check::NormalCurvature => "normal-curvature",
            Check::Sublemma => "sublemma",
            Check::Sphere => "sphere",
            Check::Product => "product",
            Check::Dgauss => "dgauss",
            Check::GaussLevi => "gauss-levi",
            Check::Superhorizontal => "superhorizontal",
            Check::Holomorphic => "holomorphic",
            Check::HalfIsotropy => "half-isotropy",
            Check::Isotropy => "isotropy",
            Check::Chain => "chain",
            Check::GaussSection => "gauss-section",
            Check::Structure => "structure",
            Check::Closedness => "closedness",
            Check::Psi => "psi",
            Check::LiftGrading => "lift-grading",
        }
    }

    /// Module group, used for ordering and documentation.
    pub fn stage(self) -> &'static str {
        match self {
            Check::Kaehler | Check::Jets | Check::Curvature => "kaehler",
            Check::Ppmc
            | Check::Codazzi
            | Check::Decomposition
            | Check::NormalCurvature
            | Check::Sublemma
            | Check::Sphere
            | Check::Product => "forms",
            Check::Dgauss
            | Check::GaussLevi
            | Check::Superhorizontal
            | Check::Holomorphic
            | Check::HalfIsotropy
            | Check::Isotropy
            | Check::Chain
            | Check::GaussSection => "gauss",
            Check::Structure | Check::Closedness | Check::Psi => "family",
            Check::LiftGrading => "flags",
        }
    }

    /// Tolerance tier by number of finite-difference layers.
    pub fn tier(self) -> Tier {
        match self {
            Check::Jets
            | Check::Sublemma
            | Check::Dgauss
            | Check::Superhorizontal
            | Check::Isotropy
            | Check::Chain
            | Check::Closedness
            | Check::Psi
            | Check::LiftGrading => Tier::OneFd,
            _ => Tier::Exact,
        }
    }

    /// Checks whose PASS is required before this one is meaningful.
    fn preconditions(self) -> &'static [Check] {
        match self {
            Check::Kaehler | Check::Jets | Check::Dgauss => &[],
            Check::NormalCurvature | Check::Sublemma => &[Check::Kaehler, Check::Ppmc],
            Check::Closedness => &[Check::Kaehler, Check::Holomorphic],
            Check::Chain | Check::Psi => &[Check::Kaehler, Check::Isotropy],
            Check::GaussSection => &[Check::Kaehler, Check::Sphere],
            _ => &[Check::Kaehler],
        }
    }

    /// Fixture flag decided by this check.
    pub fn flag(self) -> Option<&'static str> {
        match self {
            Check::Kaehler => Some("kaehler"),
            Check::Ppmc => Some("ppmc"),
            Check::Holomorphic => Some("pluriminimal"),
            Check::HalfIsotropy => Some("half_isotropic"),
            Check::Isotropy => Some("isotropic"),
            Check::Sphere => Some("spherical"),
            _ => None,
        }
    }

    /// Comma-separated names; `all` selects every check.
    pub fn parse_list(s: &str) -> Result<Vec<Check>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Check::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

impl Serialize for Check {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    /// Fixture names; empty runs every known fixture.
    pub fixtures: Vec<String>,
    /// Checks; empty runs all of them.
    pub checks: Vec<Check>,
    /// Interior points per chart axis.
    pub grid: usize,
    pub h: f64,
    pub tolerances: Tolerances,
    pub thetas: Vec<f64>,
    pub seed: u64,
    /// Record per-check wall time (makes the report non-reproducible).
    pub timing: bool,
    /// Dump the complex flag frames at the first grid point.
    pub export_frames: bool,
    pub exec: Exec,
    pub fixture_file: Option<String>,
    /// Fixtures loaded from `fixture_file`, searched after the registry.
    #[serde(skip)]
    pub extra_fixtures: Vec<FixtureRecord>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fixtures: Vec::new(),
            checks: Vec::new(),
            grid: DEFAULT_GRID,
            h: DEFAULT_H,
            tolerances: Tolerances::default(),
            thetas: family::theta_sweep(),
            seed: 0,
            timing: true,
            export_frames: false,
            exec: Exec::default(),
            fixture_file: None,
            extra_fixtures: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        if self.grid < MIN_GRID {
            return Err(Error::Config(format!("grid must have at least {MIN_GRID} points per axis, got {}", self.grid)));
        }
        if !(self.h > 0.0 && self.h < 0.1) {
            return Err(Error::Config(format!("step h must lie in (0, 0.1), got {}", self.h)));
        }
        if self.thetas.is_empty() || self.thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("theta samples must be finite and non-empty".into()));
        }
        self.resolve_fixtures().map(|_| ())
    }

    /// Requested checks in execution order, without duplicates.
    pub fn selected_checks(&self) -> Vec<Check> {
        if self.checks.is_empty() {
            return Check::ALL.to_vec();
        }
        let mut cs = self.checks.clone();
        cs.sort();
        cs.dedup();
        cs
    }

    pub fn resolve_fixtures(&self) -> Result<Vec<FixtureRecord>> {
        let mut all = fixtures::registry();
        all.extend(self.extra_fixtures.iter().cloned());
        if self.fixtures.is_empty() {
            return Ok(all);
        }
        self.fixtures
            .iter()
            .map(|name| {
                all.iter().find(|r| &r.name == name).cloned().ok_or_else(|| Error::UnknownFixture(name.clone()))
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    /// `null` when the check did not produce a number.
    pub residual: Option<f64>,
    pub threshold: f64,
    pub tier: Tier,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    pub details: BTreeMap<String, Value>,
    pub notes: Vec<String>,
}

impl CheckResult {
    fn without_value(status: Status, threshold: f64, tier: Tier, note: String) -> Self {
        CheckResult {
            residual: None,
            threshold,
            tier,
            status,
            runtime_ms: None,
            details: BTreeMap::new(),
            notes: vec![note],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagMismatch {
    pub flag: String,
    pub expected: bool,
    pub status: Status,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureReport {
    pub ambient_dim: usize,
    pub complex_dim: usize,
    pub grid_points: usize,
    pub checks: BTreeMap<String, CheckResult>,
    /// Status of every flag decided by a requested check.
    pub flags: BTreeMap<String, Status>,
    pub mismatches: Vec<FlagMismatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<gauss::FlagExport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerEntry {
    pub expected: ExpectedFlags,
    pub notes: String,
    pub conjugate: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Toolkit {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOLKIT_INFO: Toolkit = Toolkit { name: TOOLKIT, version: VERSION };

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub toolkit: Toolkit,
    pub config: RunConfig,
    pub fixtures: BTreeMap<String, FixtureReport>,
    pub ledger: BTreeMap<String, LedgerEntry>,
    pub mismatch_count: usize,
}

impl Report {
    pub fn has_mismatch(&self) -> bool {
        self.mismatch_count > 0
    }

    pub fn check(&self, fixture: &str, check: Check) -> Option<&CheckResult> {
        self.fixtures.get(fixture)?.checks.get(check.name())
    }

    pub fn to_json(&self) -> String {
        to_sorted_json(self)
    }
}

/// Pretty JSON with object keys in sorted order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    // serde_json's default map is ordered, so the round trip sorts all keys
    let v = serde_json::to_value(value).expect("report values serialise");
    serde_json::to_string_pretty(&v).expect("json values serialise")
}

/// Runs the selected checks on the selected fixtures.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let records = cfg.resolve_fixtures()?;
    let selected = cfg.selected_checks();
    let reports = cfg.exec.map(&records, |rec| run_fixture(rec, cfg, &selected));
    let mut fixtures = BTreeMap::new();
    let mut ledger = BTreeMap::new();
    let mut mismatch_count = 0;
    for (rec, rep) in records.iter().zip(reports) {
        mismatch_count += rep.mismatches.len();
        fixtures.insert(rec.name.clone(), rep);
        ledger.insert(
            rec.name.clone(),
            LedgerEntry { expected: rec.expected, notes: rec.notes.clone(), conjugate: rec.conjugate.clone() },
        );
    }
    Ok(Report { toolkit: TOOLKIT_INFO, config: cfg.clone(), fixtures, ledger, mismatch_count })
}

fn run_fixture(rec: &FixtureRecord, cfg: &RunConfig, selected: &[Check]) -> FixtureReport {
    let imm = &rec.immersion;
    let grid = Grid::interior(&imm.domain, cfg.grid).with_exec(cfg.exec);
    let sampled = Sampled::new(imm, &grid, JetMode::Analytic, cfg.h);
    let mut fr = FixtureRun { rec, cfg, grid, sampled, results: BTreeMap::new(), sphere: None, ppmc: None };
    for &c in selected {
        fr.ensure(c);
    }
    let mut checks = BTreeMap::new();
    let mut flags = BTreeMap::new();
    let mut mismatches = Vec::new();
    let expected = rec.expected.entries();
    for &c in selected {
        let res = fr.results[&c].clone();
        if let Some(flag) = c.flag() {
            flags.insert(flag.to_string(), res.status);
            let exp = expected.iter().find(|e| e.0 == flag).and_then(|e| e.1);
            if let Some(e) = exp {
                if res.status.as_flag() != Some(e) {
                    mismatches.push(FlagMismatch { flag: flag.to_string(), expected: e, status: res.status });
                }
            }
        }
        checks.insert(c.name().to_string(), res);
    }
    let frames = if cfg.export_frames {
        fr.sampled.as_ref().ok().and_then(|s| gauss::complex_gauss(&s.points[0], f64::INFINITY).ok()).map(|f| f.export())
    } else {
        None
    };
    FixtureReport {
        ambient_dim: imm.ambient_dim,
        complex_dim: imm.complex_dim,
        grid_points: fr.grid.len(),
        checks,
        flags,
        mismatches,
        frames,
    }
}

/// Value of a check before classification.
#[derive(Default)]
struct Outcome {
    residual: f64,
    details: BTreeMap<String, Value>,
    notes: Vec<String>,
    /// Status that the classified residual may not improve on.
    floor: Option<Status>,
}

impl Outcome {
    fn new(residual: f64) -> Self {
        Outcome { residual, ..Default::default() }
    }

    fn detail<T: Serialize>(mut self, key: &str, v: T) -> Self {
        self.details.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    fn details_of<T: Serialize>(mut self, v: &T) -> Self {
        if let Ok(Value::Object(map)) = serde_json::to_value(v) {
            self.details.extend(map);
        }
        self
    }

    fn cap(mut self, status: Status, note: impl Into<String>) -> Self {
        if status != Status::Pass {
            self.notes.push(note.into());
        }
        self.floor = Some(worst(self.floor.unwrap_or(Status::Pass), status));
        self
    }
}

fn severity(s: Status) -> u8 {
    match s {
        Status::Pass => 0,
        Status::Skipped => 1,
        Status::Inconclusive => 2,
        Status::Fail => 3,
    }
}

fn worst(a: Status, b: Status) -> Status {
    if severity(a) >= severity(b) {
        a
    } else {
        b
    }
}

struct FixtureRun<'a> {
    rec: &'a FixtureRecord,
    cfg: &'a RunConfig,
    grid: Grid,
    sampled: Result<Sampled>,
    results: BTreeMap<Check, CheckResult>,
    sphere: Option<MeanCurvatureData>,
    ppmc: Option<f64>,
}

impl FixtureRun<'_> {
    fn status(&mut self, c: Check) -> Status {
        self.ensure(c);
        self.results[&c].status
    }

    fn ensure(&mut self, c: Check) {
        if self.results.contains_key(&c) {
            return;
        }
        let r = self.compute(c);
        self.results.insert(c, r);
    }

    fn compute(&mut self, c: Check) -> CheckResult {
        let tier = c.tier();
        let tol = self.cfg.tolerances.get(tier);
        for &pre in c.preconditions() {
            let st = self.status(pre);
            if st != Status::Pass {
                return CheckResult::without_value(
                    Status::Skipped,
                    tol,
                    tier,
                    format!("requires {pre} PASS, got {st}"),
                );
            }
        }
        if c == Check::Product && self.rec.product_split.is_none() {
            return CheckResult::without_value(Status::Skipped, tol, tier, "not a product chart".into());
        }
        let start = Instant::now();
        let outcome = self.evaluate(c);
        let runtime_ms = self.cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        match outcome {
            Ok(o) => {
                let base = Status::classify(o.residual, tol);
                let status = worst(base, o.floor.unwrap_or(Status::Pass));
                CheckResult {
                    residual: o.residual.is_finite().then_some(o.residual),
                    threshold: tol,
                    tier,
                    status,
                    runtime_ms,
                    details: o.details,
                    notes: o.notes,
                }
            }
            Err(e) => CheckResult { runtime_ms, ..CheckResult::without_value(Status::Fail, tol, tier, e.to_string()) },
        }
    }

    fn sampled(&self) -> Result<&Sampled> {
        self.sampled.as_ref().map_err(Clone::clone)
    }

    fn ppmc(&mut self) -> Result<f64> {
        if let Some(p) = self.ppmc {
            return Ok(p);
        }
        let p = forms::ppmc_residual(self.sampled()?);
        self.ppmc = Some(p);
        Ok(p)
    }

    fn sphere(&mut self) -> Result<MeanCurvatureData> {
        if let Some(md) = &self.sphere {
            return Ok(md.clone());
        }
        let md = forms::mean_curvature_and_sphere_reduction(self.sampled()?, self.cfg.tolerances.tier1);
        self.sphere = Some(md.clone());
        Ok(md)
    }

    fn center(&self) -> Result<&LocalGeometry> {
        let s = self.sampled()?;
        Ok(&s.points[s.points.len() / 2])
    }

    fn evaluate(&mut self, c: Check) -> Result<Outcome> {
        let cfg = self.cfg;
        let tols = cfg.tolerances;
        let imm: &ChartedImmersion = &self.rec.immersion;
        match c {
            Check::Kaehler => {
                let k = kaehler::kaehler_residual(self.sampled()?);
                Ok(Outcome::new(k.orth.max(k.parallel)).detail("orthogonality", k.orth).detail("parallel", k.parallel))
            }
            Check::Jets => {
                if imm.analytic_jet.is_none() {
                    return Ok(Outcome::new(0.0).cap(Status::Skipped, "no analytic jets to compare"));
                }
                let conv = jet_convergence(imm, &self.grid.points(), cfg.h, cfg.exec)?;
                let residual = conv.at_h.d1.max(conv.at_h.d2);
                let mut o = Outcome::new(residual).details_of(&conv);
                if let Some(order) = conv.min_order() {
                    let st = if order >= MIN_ORDER { Status::Pass } else { Status::Fail };
                    o = o.cap(st, format!("measured order {order:.3} below {MIN_ORDER}"));
                } else {
                    o.notes.push("difference jets exact at both steps".into());
                }
                Ok(o)
            }
            Check::Curvature => {
                let s = self.sampled()?;
                let vals = s.grid.exec.try_map(&s.points, |lg| -> Result<[f64; 2]> {
                    let curv = CurvatureData::at(lg)?;
                    Ok([curv.symmetry_residual(), kaehler::kaehler_curvature_residual(lg, &curv)])
                })?;
                let sym = crate::exec::sup(vals.iter().map(|v| v[0]));
                let kid = crate::exec::sup(vals.iter().map(|v| v[1]));
                let lg = self.center()?;
                let fd = kaehler::curvature_from_metric_fd(imm, &lg.point, cfg.h)?;
                let gauss_route = kaehler::curvature_from_gauss(&lg.alpha);
                let route = fd.iter().zip(&gauss_route).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                Ok(Outcome::new(sym.max(kid))
                    .detail("symmetries", sym)
                    .detail("kaehler_identity", kid)
                    .detail("metric_route", route)
                    .cap(Status::classify(route, tols.tier3), "metric and Gauss-equation curvature disagree"))
            }
            Check::Ppmc => {
                let p = self.ppmc()?;
                Ok(Outcome::new(p))
            }
            Check::Codazzi => Ok(Outcome::new(forms::codazzi_residual(self.sampled()?))),
            Check::Decomposition => {
                let s = self.sampled()?;
                let surface = imm.complex_dim == 1;
                let dec = s.sup(forms::decomposition_defect);
                let nv = s.sup(forms::normal_valuedness_defect);
                let ranks: Vec<usize> = s.points.iter().map(|lg| forms::alpha11_kernel_rank(lg, 1e-6)).collect();
                let mut o = Outcome::new(dec.max(nv))
                    .detail("type_decomposition", dec)
                    .detail("normal_valued", nv)
                    .detail("alpha11_kernel_rank", [ranks.iter().min(), ranks.iter().max()]);
                if surface {
                    let sid = s.sup(forms::surface_identity_defect);
                    o.residual = o.residual.max(sid);
                    o = o.detail("surface_identity", sid);
                }
                Ok(o)
            }
            Check::NormalCurvature => {
                let v = self.sampled()?.sup(|lg| {
                    CurvatureData::at(lg)
                        .map(|curv| kaehler::normal_curvature_holomorphic_residual(lg, &curv))
                        .unwrap_or(f64::NAN)
                });
                Ok(Outcome::new(v))
            }
            Check::Sublemma => {
                let v = self.sampled()?.sup(|lg| {
                    CurvatureData::at(lg).map(|curv| kaehler::sublemma_residual(lg, &curv)).unwrap_or(f64::NAN)
                });
                Ok(Outcome::new(v))
            }
            Check::Sphere => {
                let md = self.sphere()?;
                let floor = 100.0 * tols.tier1;
                let residual = match (md.center_spread, md.radius_spread) {
                    (Some(c), Some(r)) => md.off_identity.max(c).max(r),
                    _ => f64::INFINITY,
                };
                let mut o = Outcome::new(residual).details_of(&md);
                o.notes.extend(md.warnings.iter().cloned());
                if md.kappa_min <= floor {
                    o = o.cap(Status::Fail, format!("mean curvature vanishes somewhere (kappa_min {:.3e})", md.kappa_min));
                }
                if let (Some(known), Some(c)) = (&self.rec.sphere_center, &md.center) {
                    let err = (RVec::from_vec(c.clone()) - known).amax();
                    o = o.detail("center_error", err).cap(Status::classify(err, tols.tier2), "centre differs from the known one");
                }
                Ok(o)
            }
            Check::Product => {
                let split = self.rec.product_split.unwrap_or_default();
                let p = forms::product_identity(self.sampled()?, split, PRODUCT_PAIRS, cfg.seed);
                Ok(Outcome::new(p.mixed_vs_pure.max(p.gauss_step)).details_of(&p))
            }
            Check::Dgauss => Ok(Outcome::new(gauss::dgauss_residual(imm, &self.grid, cfg.h)?)),
            Check::GaussLevi => {
                let v = gauss::gauss_levi_residual(self.sampled()?);
                let p = self.center()?.point.clone();
                let fd = gauss::gauss_hessian_fd_defect(imm, &p, 1e-3)?;
                Ok(Outcome::new(v)
                    .detail("hessian_fd", fd)
                    .cap(Status::classify(fd, tols.tier3), "difference Hessian disagrees"))
            }
            Check::Superhorizontal => {
                let sh = gauss::superhorizontality(imm, self.sampled()?, cfg.h)?;
                Ok(Outcome::new(sh.residual()).details_of(&sh))
            }
            Check::Holomorphic => {
                let h = gauss::holomorphicity(self.sampled()?)?;
                Ok(Outcome::new(h.residual()).details_of(&h))
            }
            Check::HalfIsotropy => {
                let p = self.ppmc()?;
                let hi = gauss::half_isotropy(self.sampled()?, p);
                let mut o = Outcome::new(hi.residual()).details_of(&hi);
                o.notes.extend(hi.warnings.iter().cloned());
                Ok(o)
            }
            Check::Isotropy => {
                let p = self.ppmc()?;
                match gauss::isotropy_decomposition(self.sampled()?) {
                    Ok(iso) => Ok(Outcome::new(iso.orthogonality.max(iso.parallelity).max(p))
                        .details_of(&iso)
                        .detail("ppmc", p)),
                    Err(e @ Error::RankDrop { .. }) => Ok(Outcome::new(f64::INFINITY).cap(Status::Fail, e.to_string())),
                    Err(e) => Err(e),
                }
            }
            Check::Chain => {
                let rows = gauss::differential_chain_residual(self.sampled()?)?;
                let v = crate::exec::sup(rows.iter().map(|r| r.1));
                let mut o = Outcome::new(v);
                for (name, r) in rows {
                    o = o.detail(&name, r);
                }
                Ok(o)
            }
            Check::GaussSection => {
                let md = self.sphere()?;
                let gs = gauss::gauss_section_check(self.sampled()?, &md)?;
                Ok(Outcome::new(gs.residual()).details_of(&gs))
            }
            Check::Structure => {
                let s = self.sampled()?;
                let rows = family::structure_equation_residuals(s, &cfg.thetas)?;
                let v = crate::exec::sup(rows.iter().map(StructureResiduals::max));
                let rot = crate::exec::sup(
                    cfg.thetas.iter().map(|&t| s.sup(|lg| family::rotation_component_defect(lg, t))),
                );
                Ok(Outcome::new(v)
                    .detail("per_theta", &rows)
                    .detail("rotation_components", rot)
                    .cap(Status::classify(rot, tols.tier1), "rotated form does not match its type components"))
            }
            Check::Closedness => {
                let s = self.sampled()?;
                let rows: Vec<(f64, f64)> =
                    cfg.thetas.iter().map(|&t| (t, family::closedness_residual(s, t))).collect();
                let v = crate::exec::sup(rows.iter().map(|r| r.1));
                let mut o = Outcome::new(v).detail("per_theta", &rows);
                // grid-limited quadrature: reported, not classified
                match family::integrate_family(s, PI / 2.0, None, tols.tier2) {
                    Ok(m) => o = o.detail("metric_deviation_half_turn", m.metric_deviation()),
                    Err(e) => o = o.cap(Status::Fail, e.to_string()),
                }
                Ok(o)
            }
            Check::Psi => {
                let r = family::psi_report(self.sampled()?, &cfg.thetas)?;
                let v = r.eq8.max(r.unitarity).max(r.reality).max(r.psi_pi_identity);
                Ok(Outcome::new(v).details_of(&r))
            }
            Check::LiftGrading => Ok(Outcome::new(flags::lift_grading_residual(self.sampled()?)?)),
        }
    }
}

/// One row of the fixture listing.
#[derive(Clone, Debug, Serialize)]
pub struct FixtureSummary {
    pub name: String,
    pub ambient_dim: usize,
    pub complex_dim: usize,
    pub analytic_jets: bool,
    pub expected: ExpectedFlags,
    pub notes: String,
}

pub fn list_fixtures(extra: &[FixtureRecord]) -> Vec<FixtureSummary> {
    fixtures::registry()
        .iter()
        .chain(extra)
        .map(|r| FixtureSummary {
            name: r.name.clone(),
            ambient_dim: r.immersion.ambient_dim,
            complex_dim: r.immersion.complex_dim,
            analytic_jets: r.immersion.analytic_jet.is_some(),
            expected: r.expected,
            notes: r.notes.clone(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Associated family

#[derive(Clone, Debug, Serialize)]
pub struct FamilyParams {
    pub fixture: String,
    pub theta: f64,
    /// Interior points per chart axis.
    pub grid: usize,
    /// Angles for the metric sweep and the structure-equation table.
    pub thetas: Vec<f64>,
    pub h: f64,
    pub tolerances: Tolerances,
    pub exec: Exec,
    #[serde(skip)]
    pub extra_fixtures: Vec<FixtureRecord>,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            fixture: "catenoid".into(),
            theta: PI / 2.0,
            grid: 41,
            thetas: family::theta_sweep(),
            h: DEFAULT_H,
            tolerances: Tolerances::default(),
            exec: Exec::default(),
            extra_fixtures: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberSummary {
    pub theta: f64,
    pub closedness: f64,
    pub metric_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugateMatch {
    pub fixture: String,
    pub rms: f64,
    pub reflection: bool,
    pub linkage: GaussLinkage,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub toolkit: Toolkit,
    pub params: FamilyParams,
    pub closedness: f64,
    pub metric_deviation_pointwise: f64,
    pub metric_deviation_integrated: f64,
    pub sweep: Vec<MemberSummary>,
    pub structure: Vec<StructureResiduals>,
    /// Present when the fixture has a known conjugate and θ is π/2.
    pub conjugate: Option<ConjugateMatch>,
}

impl FamilyReport {
    pub fn to_json(&self) -> String {
        to_sorted_json(self)
    }
}

/// Integrates the member `f_θ` and compares it with the known conjugate.
pub fn family_run(params: &FamilyParams) -> Result<(FamilyReport, FamilyMember)> {
    params.tolerances.validate()?;
    if params.grid < 2 {
        return Err(Error::Config("family grid needs at least 2 points per axis".into()));
    }
    let lookup = |name: &str| -> Result<FixtureRecord> {
        fixtures::find(name).or_else(|_| {
            params
                .extra_fixtures
                .iter()
                .find(|r| r.name == name)
                .cloned()
                .ok_or_else(|| Error::UnknownFixture(name.to_string()))
        })
    };
    let rec = lookup(&params.fixture)?;
    let grid = Grid::interior(&rec.immersion.domain, params.grid).with_exec(params.exec);
    let s = Sampled::new(&rec.immersion, &grid, JetMode::Analytic, params.h)?;
    let closed_tol = params.tolerances.tier2;
    let member = family::integrate_family(&s, params.theta, None, closed_tol)?;
    let sweep = params
        .thetas
        .iter()
        .map(|&t| {
            let closedness = family::closedness_residual(&s, t);
            let metric_deviation = family::integrate_family(&s, t, None, closed_tol)
                .map(|m| m.metric_deviation())
                .unwrap_or(f64::NAN);
            MemberSummary { theta: t, closedness, metric_deviation }
        })
        .collect();
    let structure = family::structure_equation_residuals(&s, &params.thetas)?;
    let conjugate = match &rec.conjugate {
        Some(name) if (params.theta - PI / 2.0).abs() < 1e-6 => {
            let other = lookup(name)?;
            let so = Sampled::new(&other.immersion, &grid, JetMode::Analytic, params.h)?;
            let target: Vec<RVec> = so.points.iter().map(|lg| lg.jet.value.clone()).collect();
            let m = family::rigid_match(&member.values, &target)?;
            let linkage = family::gauss_linkage(&s, &so, &m.rotation, params.theta);
            Some(ConjugateMatch { fixture: name.clone(), rms: m.rms, reflection: m.reflection, linkage })
        }
        _ => None,
    };
    let report = FamilyReport {
        toolkit: TOOLKIT_INFO,
        params: params.clone(),
        closedness: member.closedness,
        metric_deviation_pointwise: member.metric_deviation_pointwise,
        metric_deviation_integrated: member.metric_deviation_integrated,
        sweep,
        structure,
        conjugate,
    };
    Ok((report, member))
}

// ---------------------------------------------------------------------------
// Flag manifolds

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoAlgebra {
    Unitary,
    Orthogonal,
}

impl FromStr for DemoAlgebra {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unitary" | "u" => Ok(DemoAlgebra::Unitary),
            "orthogonal" | "so" => Ok(DemoAlgebra::Orthogonal),
            _ => Err(Error::Config(format!("unknown algebra `{s}` (expected unitary or orthogonal)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagDemoParams {
    pub algebra: DemoAlgebra,
    pub n: usize,
    /// Eigenspace dimensions; for the orthogonal algebra `d_1, ..., d_r`
    /// with `d_0 = n - 2 Σ d_j`.
    pub dims: Vec<usize>,
    /// Orthogonal levels `1/2, 3/2, ...` instead of `1, 2, ...`.
    pub half_integer: bool,
    /// Explicit unitary spectrum `i diag(λ)`, overriding `dims`.
    pub spectrum: Option<Vec<f64>>,
    pub seed: u64,
    /// Random complex-structure pairs for the splitting check (0 disables).
    pub split_pairs: usize,
    /// Include the canonical element and graded bases as matrices.
    pub dump_matrices: bool,
}

impl Default for FlagDemoParams {
    fn default() -> Self {
        FlagDemoParams {
            algebra: DemoAlgebra::Unitary,
            n: 3,
            dims: vec![1, 2],
            half_integer: false,
            spectrum: None,
            seed: 0,
            split_pairs: 0,
            dump_matrices: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperhorizontalDims {
    pub superhorizontal: usize,
    pub horizontal: usize,
    pub holomorphic_tangent: usize,
    pub horizontal_is_superhorizontal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagDemoReport {
    pub toolkit: Toolkit,
    pub params: FlagDemoParams,
    pub eigenvalues: Vec<f64>,
    pub eigenspace_dims: Vec<usize>,
    /// `(degree, dim g_degree)` for every degree between the extremes.
    pub grading: Vec<(i64, usize)>,
    pub c1: Status,
    pub c1_defect: f64,
    pub c2: Status,
    pub generation: GenerationReport,
    pub a3: f64,
    pub bracket: f64,
    pub symmetry: f64,
    pub cartan: CartanSplit,
    pub superhorizontal: SuperhorizontalDims,
    pub even_space: Option<EvenSpaceReport>,
    pub split: Option<SplitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub canonical: Option<flags::CanonicalExport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graded_bases: Option<Vec<flags::GradedExport>>,
}

impl FlagDemoReport {
    pub fn to_json(&self) -> String {
        to_sorted_json(self)
    }
}

fn canonical_from_params(p: &FlagDemoParams) -> Result<CanonicalElement> {
    match (p.algebra, &p.spectrum) {
        (DemoAlgebra::Unitary, Some(vals)) => {
            let n = vals.len();
            if n < 2 {
                return Err(Error::InvalidDims("spectrum needs at least two eigenvalues".into()));
            }
            let xi = CMat::from_fn(n, n, |i, j| if i == j { C64::new(0.0, vals[i]) } else { C64::new(0.0, 0.0) });
            CanonicalElement::from_matrix(Algebra::Unitary(n), xi)
        }
        (DemoAlgebra::Unitary, None) => {
            if p.dims.iter().sum::<usize>() != p.n || p.dims.len() < 2 || p.dims.contains(&0) {
                return Err(Error::InvalidDims(format!(
                    "unitary profile {:?} must have at least two positive parts summing to {}",
                    p.dims, p.n
                )));
            }
            flags::canonical_unitary(&p.dims, None, 0.0)
        }
        (DemoAlgebra::Orthogonal, Some(_)) => {
            Err(Error::InvalidDims("explicit spectra are supported for the unitary algebra only".into()))
        }
        (DemoAlgebra::Orthogonal, None) => {
            let used = 2 * p.dims.iter().sum::<usize>();
            if p.dims.is_empty() || p.dims.contains(&0) || used > p.n {
                return Err(Error::InvalidDims(format!("orthogonal profile {:?} does not fit in so({})", p.dims, p.n)));
            }
            if p.half_integer && used != p.n {
                return Err(Error::InvalidDims("half-integer levels need 2 Σ d_j = n".into()));
            }
            if !p.half_integer && used == p.n {
                return Err(Error::InvalidDims("integer levels need a non-trivial zero eigenspace".into()));
            }
            flags::standard_orthogonal(p.n, &p.dims, if p.half_integer { 0.5 } else { 1.0 }, None)
        }
    }
}

/// Builds the canonical element for `params` and runs the grading checks.
pub fn flag_demo(params: &FlagDemoParams) -> Result<FlagDemoReport> {
    let ce = canonical_from_params(params)?;
    let gr = flags::grade(&ce)?;
    let generation = flags::generation_check(&gr);
    let sh = flags::superhorizontal_space(&gr);
    let export = ce.export();
    let split = (params.split_pairs > 0).then(|| split_sweep(params.seed, params.split_pairs));
    Ok(FlagDemoReport {
        toolkit: TOOLKIT_INFO,
        params: params.clone(),
        eigenvalues: export.eigenvalues.clone(),
        eigenspace_dims: export.eigenspace_dims.clone(),
        grading: gr.profile(),
        c1: if gr.c1 { Status::Pass } else { Status::Fail },
        c1_defect: gr.c1_defect,
        c2: if generation.pass { Status::Pass } else { Status::Fail },
        generation,
        a3: flags::a3_residual(&ce, &gr),
        bracket: flags::bracket_grading_residual(&gr),
        symmetry: flags::grading_symmetry_residual(&gr),
        cartan: flags::cartan_split(&ce, &gr),
        superhorizontal: SuperhorizontalDims {
            superhorizontal: sh.superhorizontal.len(),
            horizontal: sh.horizontal.len(),
            holomorphic_tangent: sh.holomorphic_tangent.len(),
            horizontal_is_superhorizontal: sh.horizontal_is_superhorizontal,
        },
        even_space: matches!(ce.algebra, Algebra::Orthogonal(_)).then(|| flags::even_space_report(&ce)),
        split,
        canonical: params.dump_matrices.then_some(export),
        graded_bases: params.dump_matrices.then(|| gr.export()),
    })
}

/// Summary of the two-complex-structure splitting over random pairs.
#[derive(Clone, Debug, Serialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub pairs: usize,
    pub reconstruction: f64,
    pub block_identities: f64,
    pub la_identities: f64,
    pub plus_blocks: usize,
    pub minus_blocks: usize,
    pub quaternionic_blocks: usize,
    /// `Jt = J` and `Jt = -J` each give a single block of the matching sign.
    pub degenerate_ok: bool,
    pub failures: Vec<String>,
}

pub const SPLIT_DIMS: [usize; 3] = [2, 4, 6];

/// Splits `pairs` seeded random pairs, cycling through [`SPLIT_DIMS`].
pub fn split_sweep(seed: u64, pairs: usize) -> SplitSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = SplitSummary {
        seed,
        pairs,
        reconstruction: 0.0,
        block_identities: 0.0,
        la_identities: 0.0,
        plus_blocks: 0,
        minus_blocks: 0,
        quaternionic_blocks: 0,
        degenerate_ok: true,
        failures: Vec::new(),
    };
    for k in 0..pairs {
        let d = SPLIT_DIMS[k % SPLIT_DIMS.len()];
        let j = flags::random_complex_structure(d, &mut rng);
        let jt = flags::random_complex_structure(d, &mut rng);
        match flags::split_two_complex_structures(&j, &jt) {
            Ok(s) => {
                sum.reconstruction = sum.reconstruction.max(s.reconstruction);
                sum.block_identities = sum.block_identities.max(s.block_identities);
                sum.la_identities = sum.la_identities.max(s.la_identities);
                for b in &s.blocks {
                    match b.kind {
                        BlockKind::PlusJ => sum.plus_blocks += 1,
                        BlockKind::MinusJ => sum.minus_blocks += 1,
                        BlockKind::Quaternionic => sum.quaternionic_blocks += 1,
                    }
                }
            }
            Err(e) => sum.failures.push(format!("pair {k} (dim {d}): {e}")),
        }
        for (sign, kind) in [(1.0, BlockKind::PlusJ), (-1.0, BlockKind::MinusJ)] {
            let ok = flags::split_two_complex_structures(&j, &(&j * sign))
                .map(|s| s.blocks.len() == 1 && s.blocks[0].kind == kind)
                .unwrap_or(false);
            sum.degenerate_ok &= ok;
        }
    }
    sum
}

/// One canonical construction of the appendix sweep.
#[derive(Clone, Debug, Serialize)]
pub struct AppendixCase {
    pub label: String,
    /// Orthogonal levels `1/2, 3/2, ...`; these need not satisfy C2.
    pub half_integer: bool,
    pub c1: bool,
    pub c1_defect: f64,
    pub c2: bool,
    pub closure_dim: usize,
    pub algebra_dim: usize,
    pub a3: f64,
    pub bracket: f64,
    pub even_space: Option<EvenSpaceReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AppendixSweep {
    pub cases: Vec<AppendixCase>,
    /// Unitary spectrum with a gap of two, expected to fail generation.
    pub gap_two: GenerationReport,
}

fn appendix_case(label: String, half_integer: bool, ce: &CanonicalElement) -> Result<AppendixCase> {
    let gr = flags::grade(ce)?;
    let g = flags::generation_check(&gr);
    Ok(AppendixCase {
        label,
        half_integer,
        c1: gr.c1,
        c1_defect: gr.c1_defect,
        c2: g.pass,
        closure_dim: g.closure_dim,
        algebra_dim: g.algebra_dim,
        a3: flags::a3_residual(ce, &gr),
        bracket: flags::bracket_grading_residual(&gr),
        even_space: matches!(ce.algebra, Algebra::Orthogonal(_)).then(|| flags::even_space_report(ce)),
    })
}

/// Every unitary profile for `n ∈ {2,3,4}`, every admissible orthogonal
/// profile for `n ∈ {4,5,6}`, `r ∈ {1,2}`, and the half-integer profiles of
/// `so(4)` and `so(6)`.
pub fn appendix_sweep() -> Result<AppendixSweep> {
    let mut cases = Vec::new();
    for n in 2..=4 {
        for dims in flags::unitary_profiles(n) {
            let ce = flags::canonical_unitary(&dims, None, 0.0)?;
            cases.push(appendix_case(format!("u({n}) {dims:?}"), false, &ce)?);
        }
    }
    for n in 4..=6 {
        for r in 1..=2 {
            for (dims, d0) in flags::orthogonal_profiles(n, r) {
                let ce = flags::standard_orthogonal(n, &dims, 1.0, None)?;
                cases.push(appendix_case(format!("so({n}) {dims:?} d0={d0}"), false, &ce)?);
            }
        }
    }
    for n in [4, 6] {
        for levels in 1..=2 {
            for dims in flags::half_integer_profiles(n, levels) {
                let ce = flags::standard_orthogonal(n, &dims, 0.5, None)?;
                cases.push(appendix_case(format!("so({n}) half {dims:?}"), true, &ce)?);
            }
        }
    }
    let gap = canonical_from_params(&FlagDemoParams {
        spectrum: Some(vec![0.0, 0.0, 2.0, 2.0]),
        ..FlagDemoParams::default()
    })?;
    let gap_two = flags::generation_check(&flags::grade(&gap)?);
    Ok(AppendixSweep { cases, gap_two })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(fixtures: &[&str], checks: &str) -> RunConfig {
        RunConfig {
            fixtures: fixtures.iter().map(|s| s.to_string()).collect(),
            checks: Check::parse_list(checks).unwrap(),
            grid: 5,
            timing: false,
            ..RunConfig::default()
        }
    }

    #[test]
    fn check_names_round_trip() {
        for c in Check::ALL {
            assert_eq!(c.name().parse::<Check>().unwrap(), c);
        }
        assert!(matches!("bogus".parse::<Check>(), Err(Error::UnknownCheck(_))));
        assert_eq!(Check::parse_list("all").unwrap().len(), Check::ALL.len());
        let mut sorted = Check::ALL.to_vec();
        sorted.sort();
        assert_eq!(sorted, Check::ALL.to_vec());
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { grid: 4, ..RunConfig::default() }.validate().is_err());
        let bad = RunConfig { tolerances: Tolerances { tier1: -1.0, ..Tolerances::default() }, ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let unknown = RunConfig { fixtures: vec!["torus9".into()], ..RunConfig::default() };
        assert!(matches!(unknown.validate(), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn sphere_passes_ppmc_and_levi() {
        let rep = run(&cfg(&["sphere"], "ppmc,gauss-levi")).unwrap();
        let f = &rep.fixtures["sphere"];
        assert_eq!(f.checks.len(), 2);
        assert_eq!(f.checks["ppmc"].status, Status::Pass);
        assert_eq!(f.checks["gauss-levi"].status, Status::Pass);
        assert!(!rep.has_mismatch());
    }

    #[test]
    fn ellipsoid_fails_ppmc_as_expected() {
        let rep = run(&cfg(&["ellipsoid"], "ppmc")).unwrap();
        assert_eq!(rep.fixtures["ellipsoid"].checks["ppmc"].status, Status::Fail);
        assert!(!rep.has_mismatch());
    }

    #[test]
    fn non_kaehler_chart_skips_downstream() {
        let rep = run(&cfg(&["skewed_plane"], "kaehler,ppmc,dgauss")).unwrap();
        let f = &rep.fixtures["skewed_plane"];
        assert_eq!(f.checks["kaehler"].status, Status::Fail);
        assert_eq!(f.checks["ppmc"].status, Status::Skipped);
        assert_eq!(f.checks["dgauss"].status, Status::Pass);
        assert!(!rep.has_mismatch());
    }

    #[test]
    fn report_is_deterministic_without_timing() {
        let c = cfg(&["veronese", "catenoid"], "sphere,isotropy,product,closedness");
        let a = run(&c).unwrap();
        assert_eq!(a.to_json(), run(&c).unwrap().to_json());
        assert!(!a.to_json().contains("runtime_ms"));
        let b = run(&RunConfig { exec: Exec::Sequential, ..c }).unwrap();
        assert_eq!(to_sorted_json(&a.fixtures), to_sorted_json(&b.fixtures));
    }

    #[test]
    fn flag_demo_examples() {
        let r = flag_demo(&FlagDemoParams::default()).unwrap();
        assert_eq!(r.grading, vec![(-1, 2), (0, 5), (1, 2)]);
        assert_eq!((r.c1, r.c2), (Status::Pass, Status::Pass));
        let so4 = flag_demo(&FlagDemoParams {
            algebra: DemoAlgebra::Orthogonal,
            n: 4,
            dims: vec![1],
            ..FlagDemoParams::default()
        })
        .unwrap();
        assert_eq!(so4.grading.iter().map(|g| g.1).collect::<Vec<_>>(), vec![0, 2, 2, 2, 0]);
        assert_eq!((so4.c1, so4.c2), (Status::Pass, Status::Pass));
        let gap = flag_demo(&FlagDemoParams { spectrum: Some(vec![0.0, 0.0, 2.0, 2.0]), ..FlagDemoParams::default() })
            .unwrap();
        assert_eq!(gap.c2, Status::Fail);
        let bad = FlagDemoParams { dims: vec![1, 1], ..FlagDemoParams::default() };
        assert!(matches!(flag_demo(&bad), Err(Error::InvalidDims(_))));
    }
}
