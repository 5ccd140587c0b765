//! Residual classification.
//!
//! A residual passes below its tier tolerance and fails above one hundred
//! times that tolerance; the gap in between is reported as inconclusive.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
    /// The check does not apply to this fixture (a precondition failed).
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::Skipped => "SKIPPED",
        };
        f.write_str(s)
    }
}

pub const FAIL_FACTOR: f64 = 100.0;

impl Status {
    pub fn classify(residual: f64, tol: f64) -> Status {
        if residual.is_nan() {
            Status::Fail
        } else if residual < tol {
            Status::Pass
        } else if residual > FAIL_FACTOR * tol {
            Status::Fail
        } else {
            Status::Inconclusive
        }
    }

    /// Boolean reading of a decided status.
    pub fn as_flag(self) -> Option<bool> {
        match self {
            Status::Pass => Some(true),
            Status::Fail => Some(false),
            _ => None,
        }
    }
}

/// Error budget per number of finite-difference layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Analytic jets only.
    Exact,
    /// One finite-difference layer.
    OneFd,
    /// Two finite-difference layers.
    TwoFd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tier1: f64,
    pub tier2: f64,
    pub tier3: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tier1: 1e-8, tier2: 1e-5, tier3: 1e-3 }
    }
}

impl Tolerances {
    pub fn get(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Exact => self.tier1,
            Tier::OneFd => self.tier2,
            Tier::TwoFd => self.tier3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("tier1", self.tier1), ("tier2", self.tier2), ("tier3", self.tier3)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_bands() {
        assert_eq!(Status::classify(1e-9, 1e-8), Status::Pass);
        assert_eq!(Status::classify(1e-7, 1e-8), Status::Inconclusive);
        assert_eq!(Status::classify(2e-6, 1e-8), Status::Fail);
        assert_eq!(Status::classify(f64::NAN, 1e-8), Status::Fail);
    }

    #[test]
    fn tolerances_must_be_positive() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances { tier2: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
