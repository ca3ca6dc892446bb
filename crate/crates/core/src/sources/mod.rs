//! Seeded generators of lattice sequences `z_0, z_1, …`.

mod step;
mod walks;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{LedgerError, LocalTimeLedger, Snapshot};
use crate::rng::stream_rng;
use crate::rotation::{
    Angle, CfSpec, ContinuedFraction, RotationCocycle, RotationError, SpecialFlow,
    SpecialFlowConfig, StepFunctionSpec,
};
use crate::site::{parse_site_lines, LatticeSite, SiteError};

pub use step::{
    classify, lattice_index, Atom, Classification, Recurrence, StepDistribution,
    PROBABILITY_TOLERANCE,
};
pub use walks::{Coboundary, Explicit, RandomWalk, WindowFunctional};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error(transparent)]
    Site(#[from] SiteError),
    #[error("explicit list exhausted after {0} sites")]
    Exhausted(usize),
    #[error("window table is missing {0} words")]
    IncompleteTable(usize),
    #[error("invalid source: {0}")]
    Config(String),
    #[error(transparent)]
    Rotation(#[from] RotationError),
}

/// A stream of lattice sites. Implementations are single-owner.
pub trait SiteSource: Send {
    fn dim(&self) -> usize;
    fn next_site(&mut self) -> Result<LatticeSite, SourceError>;
}

impl<S: SiteSource + ?Sized> SiteSource for Box<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn next_site(&mut self) -> Result<LatticeSite, SourceError> {
        (**self).next_site()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowEntry {
    pub word: Vec<i64>,
    pub value: LatticeSite,
}

/// Source description as it appears in a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Random walk with the given step law.
    Rw {
        steps: Vec<Atom>,
    },
    /// Nearest-neighbour walk on `Z^dim`.
    SimpleWalk {
        dim: usize,
    },
    Coboundary {
        law: Vec<Atom>,
    },
    Window {
        alphabet: Vec<Atom>,
        r: usize,
        table: Vec<WindowEntry>,
    },
    Rotation {
        cf: CfSpec,
        #[serde(default = "StepFunctionSpec::sign_halves")]
        f: StepFunctionSpec,
        /// Starting angle; drawn from the seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<f64>,
    },
    SpecialFlow {
        cf: CfSpec,
        /// Number of spike levels when `lambda_indices` is absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_indices: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<f64>,
    },
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sites: Option<Vec<LatticeSite>>,
        /// One site per line, coordinates separated by spaces.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
    },
}

/// A source description together with the seed that fixes its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub spec: SourceSpec,
    pub seed: u64,
}

impl SourceConfig {
    pub fn new(spec: SourceSpec, seed: u64) -> Self {
        Self { spec, seed }
    }

    pub fn build(&self) -> Result<Box<dyn SiteSource>, SourceError> {
        self.spec.build(self.seed)
    }
}

fn law(atoms: &[Atom]) -> Result<StepDistribution, SourceError> {
    StepDistribution::from_atoms(atoms)
}

/// Starting angle of a rotation source: `x` when given, else drawn from `seed`.
pub fn start_angle(x: Option<f64>, seed: u64) -> Result<Angle, SourceError> {
    match x {
        Some(x) => Angle::from_f64(x)
            .ok_or_else(|| SourceError::Config(format!("start point {x} not in [0,1)"))),
        None => Ok(Angle::random(&mut stream_rng(seed))),
    }
}

impl SourceSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn SiteSource>, SourceError> {
        Ok(match self {
            SourceSpec::Rw { steps } => Box::new(RandomWalk::new(law(steps)?, seed)),
            SourceSpec::SimpleWalk { dim } => {
                if *dim == 0 || *dim > crate::site::MAX_DIM {
                    return Err(SiteError::BadDimension(*dim).into());
                }
                Box::new(RandomWalk::new(StepDistribution::simple(*dim), seed))
            }
            SourceSpec::Coboundary { law: atoms } => Box::new(Coboundary::new(law(atoms)?, seed)),
            SourceSpec::Window { alphabet, r, table } => {
                let table: Vec<(Vec<i64>, LatticeSite)> =
                    table.iter().map(|e| (e.word.clone(), e.value)).collect();
                Box::new(WindowFunctional::new(law(alphabet)?, *r, &table, seed)?)
            }
            SourceSpec::Rotation { cf, f, x } => {
                let cf = ContinuedFraction::from_spec(cf)?;
                Box::new(RotationCocycle::new(&cf, f, start_angle(*x, seed)?)?)
            }
            SourceSpec::SpecialFlow { .. } => {
                Box::new(SpecialFlow::new(&self.special_flow_config(seed)?, None)?)
            }
            SourceSpec::Explicit { sites, path } => {
                let list = match (sites, path) {
                    (Some(s), None) => s.clone(),
                    (None, Some(p)) => {
                        let text = std::fs::read_to_string(p).map_err(|e| {
                            SourceError::Config(format!("reading {}: {e}", p.display()))
                        })?;
                        parse_site_lines(&text).map_err(SourceError::Config)?
                    }
                    _ => {
                        return Err(SourceError::Config(
                            "explicit source needs exactly one of sites, path".into(),
                        ))
                    }
                };
                Box::new(Explicit::new(list)?)
            }
        })
    }

    /// Step law of the walk variants.
    pub fn step_law(&self) -> Option<Result<StepDistribution, SourceError>> {
        match self {
            SourceSpec::Rw { steps } => Some(law(steps)),
            SourceSpec::SimpleWalk { dim } => Some(Ok(StepDistribution::simple(*dim))),
            _ => None,
        }
    }

    pub fn special_flow_config(&self, seed: u64) -> Result<SpecialFlowConfig, SourceError> {
        let SourceSpec::SpecialFlow {
            cf,
            levels,
            lambda_indices,
            x,
        } = self
        else {
            return Err(SourceError::Config("not a special_flow source".into()));
        };
        let cf = ContinuedFraction::from_spec(cf)?;
        let start = start_angle(*x, seed)?;
        let config = match (levels, lambda_indices) {
            (_, Some(idx)) => {
                let config = SpecialFlowConfig {
                    cf,
                    lambda_indices: idx.clone(),
                    start,
                };
                if levels.is_some_and(|l| l != config.level_count()) {
                    return Err(SourceError::Config(
                        "levels disagrees with lambda_indices".into(),
                    ));
                }
                config
            }
            (Some(l), None) => SpecialFlowConfig::minimal(cf, *l, start)?,
            (None, None) => {
                return Err(SourceError::Config(
                    "special_flow needs levels or lambda_indices".into(),
                ))
            }
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Feeds `n` sites into a fresh ledger, taking a snapshot whenever the step
/// count reaches one of `checkpoints` (which must be increasing).
pub fn fill_ledger(
    source: &mut dyn SiteSource,
    n: u64,
    checkpoints: &[u64],
) -> Result<(LocalTimeLedger, Vec<Snapshot>), RunError> {
    let mut ledger = LocalTimeLedger::new(source.dim())?;
    let mut snaps = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().copied().filter(|&c| c <= n).peekable();
    while ledger.n() < n {
        ledger.record(source.next_site()?)?;
        if next.peek() == Some(&ledger.n()) {
            snaps.push(ledger.snapshot());
            next.next();
        }
    }
    Ok((ledger, snaps))
}

/// First `n` sites of a source.
pub fn take_sites(source: &mut dyn SiteSource, n: usize) -> Result<Vec<LatticeSite>, SourceError> {
    (0..n).map(|_| source.next_site()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> SourceSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn spec_round_trip() {
        let specs = [
            r#"{"variant":"rw","steps":[{"site":[1],"p":0.5},{"site":[-1],"p":0.5}]}"#,
            r#"{"variant":"simple_walk","dim":3}"#,
            r#"{"variant":"rotation","cf":{"kind":"repeating","pattern":[1]},"x":0.25}"#,
            r#"{"variant":"special_flow","cf":{"kind":"repeating","pattern":[1]},"levels":2}"#,
            r#"{"variant":"explicit","sites":[[0],[1]]}"#,
        ];
        for s in specs {
            let spec = parse(s);
            let back: SourceSpec =
                serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
            assert_eq!(back, spec);
            spec.build(3).unwrap();
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<SourceSpec>(
            r#"{"variant":"simple_walk","dim":1,"drift":2}"#
        )
        .is_err());
    }

    #[test]
    fn equal_configs_equal_streams() {
        for spec in [
            parse(r#"{"variant":"simple_walk","dim":2}"#),
            parse(r#"{"variant":"rotation","cf":{"kind":"repeating","pattern":[1]}}"#),
            parse(r#"{"variant":"coboundary","law":[{"site":[0],"p":0.5},{"site":[3],"p":0.5}]}"#),
        ] {
            let c = SourceConfig::new(spec, 77);
            let a = take_sites(&mut *c.build().unwrap(), 500).unwrap();
            let b = take_sites(&mut *c.build().unwrap(), 500).unwrap();
            assert_eq!(a, b);
            let other = SourceConfig::new(c.spec.clone(), 78);
            assert_ne!(a, take_sites(&mut *other.build().unwrap(), 500).unwrap());
        }
    }

    #[test]
    fn explicit_needs_one_input() {
        let both = SourceSpec::Explicit {
            sites: Some(vec![LatticeSite::scalar(0)]),
            path: Some("x".into()),
        };
        assert!(matches!(both.build(0), Err(SourceError::Config(_))));
    }

    #[test]
    fn explicit_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.txt");
        std::fs::write(&p, "# path\n0 0\n1 0\n\n0 0\n").unwrap();
        let spec = SourceSpec::Explicit {
            sites: None,
            path: Some(p),
        };
        let mut src = spec.build(0).unwrap();
        let (ledger, _) = fill_ledger(&mut *src, 3, &[]).unwrap();
        assert_eq!(ledger.self_intersections(), 5);
        assert_eq!(ledger.dim(), 2);
    }

    #[test]
    fn checkpoints_snapshot_at_exact_n() {
        let mut src = parse(r#"{"variant":"simple_walk","dim":1}"#)
            .build(1)
            .unwrap();
        let (ledger, snaps) = fill_ledger(&mut *src, 1000, &[10, 100, 1000, 5000]).unwrap();
        assert_eq!(
            snaps.iter().map(|s| s.n).collect::<Vec<_>>(),
            vec![10, 100, 1000]
        );
        assert_eq!(snaps[2].self_intersections, ledger.self_intersections());
    }

    #[test]
    fn special_flow_levels_must_match() {
        let spec = parse(
            r#"{"variant":"special_flow","cf":{"kind":"repeating","pattern":[1]},"levels":3,"lambda_indices":[3,7,16]}"#,
        );
        assert!(spec.special_flow_config(0).is_err());
    }
}
