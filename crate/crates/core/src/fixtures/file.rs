//! Fixture definition files.
//!
//! ```toml
//! [[fixture]]
//! name = "small_sphere"
//! chart = "sphere"
//! n = 3
//! m = 1
//! domain = { lo = [-0.4, -0.4], hi = [0.4, 0.4] }
//! analytic_jets = true
//! ```

use std::path::Path;

use serde::Deserialize;

use super::{chart_by_id, find, ExpectedFlags, FixtureRecord};
use crate::chart::DomainBox;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureDef {
    pub name: String,
    pub chart: String,
    pub n: usize,
    pub m: usize,
    pub domain: Option<DomainBox>,
    #[serde(default = "yes")]
    pub analytic_jets: bool,
    pub expected: Option<ExpectedFlags>,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    #[serde(default)]
    fixture: Vec<FixtureDef>,
}

pub fn parse_fixture_file(text: &str) -> Result<Vec<FixtureRecord>> {
    let file: FixtureFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    file.fixture.into_iter().map(build).collect()
}

pub fn load_fixture_file(path: &Path) -> Result<Vec<FixtureRecord>> {
    parse_fixture_file(&std::fs::read_to_string(path)?)
}

fn build(def: FixtureDef) -> Result<FixtureRecord> {
    let mut imm = chart_by_id(&def.chart).ok_or_else(|| Error::UnknownFixture(def.chart.clone()))?;
    if imm.ambient_dim != def.n || imm.complex_dim != def.m {
        return Err(Error::Config(format!(
            "fixture `{}`: chart `{}` has n = {}, m = {}, file says n = {}, m = {}",
            def.name, def.chart, imm.ambient_dim, imm.complex_dim, def.n, def.m
        )));
    }
    if let Some(dom) = def.domain {
        let inside = dom.dim() == imm.dim()
            && dom.lo.iter().zip(&imm.domain.lo).all(|(a, b)| a >= b)
            && dom.hi.iter().zip(&imm.domain.hi).all(|(a, b)| a <= b)
            && dom.lo.iter().zip(&dom.hi).all(|(a, b)| a < b);
        if !inside {
            return Err(Error::Config(format!("fixture `{}`: domain must be a non-empty sub-box of the chart domain", def.name)));
        }
        imm.domain = dom;
    }
    if !def.analytic_jets {
        imm = imm.without_analytic_jets();
    }
    imm.name = def.name.clone();
    let base = find(&def.chart)?;
    Ok(FixtureRecord {
        name: def.name,
        immersion: imm,
        expected: def.expected.unwrap_or(base.expected),
        notes: format!("defined from chart `{}`", def.chart),
        conjugate: None,
        product_split: base.product_split,
        sphere_center: base.sphere_center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_restricts_domain() {
        let text = r#"
            [[fixture]]
            name = "small_sphere"
            chart = "sphere"
            n = 3
            m = 1
            domain = { lo = [-0.4, -0.4], hi = [0.4, 0.4] }
            analytic_jets = false
        "#;
        let recs = parse_fixture_file(text).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].name, "small_sphere");
        assert!(recs[0].immersion.analytic_jet.is_none());
        assert_eq!(recs[0].immersion.domain.hi, vec![0.4, 0.4]);
        assert_eq!(recs[0].expected.spherical, Some(true));
    }

    #[test]
    fn rejects_inconsistent_dimensions_and_unknown_charts() {
        let bad = "[[fixture]]\nname = 'x'\nchart = 'sphere'\nn = 4\nm = 1\n";
        assert!(matches!(parse_fixture_file(bad), Err(Error::Config(_))));
        let unknown = "[[fixture]]\nname = 'x'\nchart = 'torus'\nn = 3\nm = 1\n";
        assert!(matches!(parse_fixture_file(unknown), Err(Error::UnknownFixture(_))));
        assert!(matches!(parse_fixture_file("fixture = 3"), Err(Error::Config(_))));
    }
}
