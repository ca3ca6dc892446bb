//! Batch runner: JSON plans in, deterministic CSV tables and a JSON summary out.

mod plan;
mod run;
mod selftest;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::conditions::ConditionError;
use crate::empirical::EmpiricalError;
use crate::ledger::LedgerError;
use crate::rotation::RotationError;
use crate::sources::{RunError, SourceError};
use crate::spectral::SpectralError;

pub use plan::{parse_plan, ExperimentKind, ExperimentPlan, Outputs, PlanError};
pub use run::run_plan;
pub use selftest::run_selftest;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Empirical(#[from] EmpiricalError),
    #[error(transparent)]
    Rotation(#[from] RotationError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{0}")]
    Setup(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl From<RunError> for ExperimentError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Source(e) => e.into(),
            RunError::Ledger(e) => e.into(),
        }
    }
}

/// A pass/fail comparison, tagged with the operation that produced `value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub op: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: String,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        op: &'static str,
        passed: bool,
        value: f64,
        threshold: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            op,
            passed,
            value,
            threshold: threshold.into(),
        }
    }
}

/// A CSV file held in memory until the run finishes.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Table {
    pub(crate) fn build(
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<Self, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| ExperimentError::Setup(e.to_string()))?;
        Ok(Self {
            name: name.to_string(),
            bytes,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub plan: ExperimentPlan,
    pub tables: Vec<Table>,
    /// `(op, result)` pairs in emission order.
    pub results: Vec<(&'static str, serde_json::Value)>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_json(&self) -> String {
        let results: Vec<serde_json::Value> = self
            .results
            .iter()
            .map(|(op, v)| serde_json::json!({ "op": op, "result": v }))
            .collect();
        let doc = serde_json::json!({
            "plan": self.plan,
            "library_version": env!("CARGO_PKG_VERSION"),
            "results": results,
            "checks": self.checks,
            "passed": self.passed(),
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Writes every table and the summary into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<(), ExperimentError> {
        fn io(p: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
            move |source| ExperimentError::Io {
                path: p.display().to_string(),
                source,
            }
        }
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let out = self.plan.outputs();
        for t in &self.tables {
            let p = dir.join(format!("{}{}", out.prefix, t.name));
            std::fs::write(&p, &t.bytes).map_err(io(&p))?;
        }
        let p = dir.join(&out.summary);
        std::fs::write(&p, self.summary_json()).map_err(io(&p))?;
        Ok(())
    }
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("result serializes")
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.12e}")
}
