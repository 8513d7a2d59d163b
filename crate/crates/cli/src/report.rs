//! Checked claims and the run summary.

use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One numerical claim: `value <= bound + tolerance` or
/// `value >= bound - tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            bound,
            tolerance,
            // NaN fails
            pass: value <= bound + tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            bound,
            tolerance,
            pass: value >= bound - tolerance,
        }
    }
}

/// Contents of `summary.json`. Wall-clock data goes to `run_info.json` so
/// that reruns with the same config and seed reproduce this file exactly.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: &'static str,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Summary {
    /// The output directory is dropped from the echoed config so that runs
    /// differing only in where they write compare equal.
    pub fn new(mut config: ExperimentConfig, files: Vec<String>, checks: Vec<Check>) -> Self {
        config.output = None;
        Summary {
            experiment: config.experiment.name(),
            pass: checks.iter().all(|c| c.pass),
            config,
            files,
            checks,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub version: &'static str,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub elapsed_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_apply_the_tolerance() {
        assert!(Check::at_most("a", 1.05, 1.0, 0.1).pass);
        assert!(!Check::at_most("a", 1.2, 1.0, 0.1).pass);
        assert!(Check::at_least("b", 0.95, 1.0, 0.1).pass);
        assert!(!Check::at_least("b", f64::NAN, 1.0, 0.1).pass);
        assert!(!Check::at_most("c", f64::NAN, 1.0, 0.1).pass);
    }
}
