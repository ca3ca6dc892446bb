//! Strict JSON experiment plans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empirical::SeedMode;
use crate::fields::FieldSpec;
use crate::sources::SourceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Stats,
    Gc,
    Fclt,
    RwAsym,
    Rotation,
    Counterexample,
    Variance,
    Selftest,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Stats => "stats",
            ExperimentKind::Gc => "gc",
            ExperimentKind::Fclt => "fclt",
            ExperimentKind::RwAsym => "rw-asym",
            ExperimentKind::Rotation => "rotation",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::Variance => "variance",
            ExperimentKind::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    /// Base seed; sequence and field seeds are derived from it.
    #[serde(default, alias = "seedBase")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Monte Carlo replicates, field seeds (gc) or independent sequences
    /// (rw-asym, rotation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SeedMode>,
    /// Level `s` of the iterated-logarithm check (gc).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    /// Continued-fraction depth of the Denjoy–Koksma scan (rotation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Step budget of the special flow (counterexample).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Output file names, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Outputs>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Prepended to every CSV file name.
    #[serde(default)]
    pub prefix: String,
    #[serde(default = "Outputs::default_summary")]
    pub summary: String,
}

impl Outputs {
    fn default_summary() -> String {
        "summary.json".into()
    }
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            prefix: String::new(),
            summary: Self::default_summary(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}: required by this experiment")]
    Missing(String),
    #[error("{path}: not used by {experiment} experiments")]
    Unused {
        path: String,
        experiment: &'static str,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> PlanError {
    PlanError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a plan. Unknown keys are errors naming their
/// `$`-rooted path.
pub fn parse_plan(text: &str) -> Result<ExperimentPlan, PlanError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let plan: ExperimentPlan = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner().to_string();
        let segs = e.path().to_string();
        let mut path = if segs == "." {
            "$".to_string()
        } else {
            format!("$.{segs}")
        };
        if let Some(rest) = inner.strip_prefix("unknown field `") {
            if let Some(name) = rest.split('`').next() {
                if !path.ends_with(&format!(".{name}")) {
                    path = format!("{path}.{name}");
                }
            }
        }
        PlanError::Schema {
            path,
            message: inner,
        }
    })?;
    validate(&plan)?;
    Ok(plan)
}

impl ExperimentPlan {
    pub fn outputs(&self) -> Outputs {
        self.outputs.clone().unwrap_or_default()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

fn validate(plan: &ExperimentPlan) -> Result<(), PlanError> {
    use ExperimentKind as K;
    let kind = plan.experiment;
    let present: [(&str, bool); 11] = [
        ("source", plan.source.is_some()),
        ("n", plan.n.is_some()),
        ("checkpoints", plan.checkpoints.is_some()),
        ("field", plan.field.is_some()),
        ("grid", plan.grid.is_some()),
        ("replicates", plan.replicates.is_some()),
        ("mode", plan.mode.is_some()),
        ("s", plan.s.is_some()),
        ("kmax", plan.kmax.is_some()),
        ("depth", plan.depth.is_some()),
        ("budget", plan.budget.is_some()),
    ];
    let (required, optional): (&[&str], &[&str]) = match kind {
        K::Stats => (&["source", "n"], &["checkpoints"]),
        K::Gc => (
            &["source", "field", "n"],
            &["checkpoints", "replicates", "s"],
        ),
        K::Fclt => (&["source", "n", "grid", "replicates"], &["field", "mode"]),
        K::RwAsym => (&["source", "n"], &["checkpoints", "replicates", "kmax"]),
        K::Rotation => (&["source", "n"], &["checkpoints", "replicates", "depth"]),
        K::Counterexample => (&["source"], &["budget"]),
        K::Variance => (&["source", "field", "n", "replicates"], &["kmax"]),
        K::Selftest => (&[], &[]),
    };
    for (name, is_set) in present {
        if required.contains(&name) && !is_set {
            return Err(PlanError::Missing(format!("$.{name}")));
        }
        if is_set && !required.contains(&name) && !optional.contains(&name) {
            return Err(PlanError::Unused {
                path: format!("$.{name}"),
                experiment: kind.name(),
            });
        }
    }

    if let Some(n) = plan.n {
        if n == 0 {
            return Err(invalid("$.n", "must be positive"));
        }
    }
    if let Some(cps) = &plan.checkpoints {
        if cps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("$.checkpoints", "must be strictly increasing"));
        }
        if let (Some(&last), Some(n)) = (cps.last(), plan.n) {
            if last > n {
                return Err(invalid(
                    "$.checkpoints",
                    format!("checkpoint {last} exceeds n = {n}"),
                ));
            }
        }
    }
    if let Some(f) = &plan.field {
        f.validate()
            .map_err(|e| invalid("$.field", e.to_string()))?;
    }
    if let Some(grid) = &plan.grid {
        if grid.is_empty()
            || grid.windows(2).any(|w| w[1] <= w[0])
            || grid.iter().any(|s| !(0.0..=1.0).contains(s))
        {
            return Err(invalid(
                "$.grid",
                "must be nonempty, strictly increasing and inside [0, 1]",
            ));
        }
    }
    if kind == K::Fclt {
        let r = plan.replicates.unwrap_or(0);
        if r < crate::empirical::MIN_REPLICATES {
            return Err(invalid(
                "$.replicates",
                format!(
                    "replicates < {} (got {r})",
                    crate::empirical::MIN_REPLICATES
                ),
            ));
        }
    }
    if let Some(source) = &plan.source {
        let err = |e: crate::sources::SourceError| invalid("$.source", e.to_string());
        match kind {
            K::Counterexample => {
                source.special_flow_config(plan.seed).map_err(err)?;
            }
            K::Rotation if !matches!(source, SourceSpec::Rotation { .. }) => {
                return Err(invalid(
                    "$.source.variant",
                    "rotation experiments need a rotation source",
                ));
            }
            K::Variance | K::RwAsym => match source.step_law() {
                Some(law) => {
                    law.map_err(err)?;
                }
                None => {
                    return Err(invalid(
                        "$.source.variant",
                        "needs a random-walk source (rw or simple_walk)",
                    ))
                }
            },
            _ => {
                // Constructing the source checks laws and tables without drawing.
                source.build(plan.seed).map_err(err)?;
            }
        }
    }
    Ok(())
}
