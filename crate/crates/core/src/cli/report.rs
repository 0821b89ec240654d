//! JSON experiment report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::suites::{Check, SuiteReport};

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub engine_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub quantities: BTreeMap<String, serde_json::Value>,
    pub passed: bool,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn new(experiment: &str, seed: u64, config: serde_json::Value, suite: SuiteReport, wall: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            passed: suite.passed(),
            checks: suite.checks,
            quantities: suite.quantities,
            wall_clock_seconds: wall,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, out: Option<&Path>) -> std::io::Result<()> {
        match out {
            Some(p) => std::fs::write(p, self.to_json()),
            None => {
                print!("{}", self.to_json());
                Ok(())
            }
        }
    }
}
