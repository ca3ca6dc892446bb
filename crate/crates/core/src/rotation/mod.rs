//! Rotations of the circle: continued fractions, step-function cocycles,
//! and the special-flow construction with spiking roof.

mod angle;
mod cf;
mod cocycle;
mod special_flow;
mod step_fn;

use thiserror::Error;

pub use angle::Angle;
pub use cf::{CfSpec, ContinuedFraction, MAX_DENOMINATOR};
pub use cocycle::{denjoy_koksma_check, DenjoyKoksmaReport, RotationCocycle, DK_MAX_LENGTH};
pub use special_flow::{
    counterexample_ratio_schedule, RatioSchedule, ScheduleRow, SpecialFlow, SpecialFlowConfig,
    SpikeLevel,
};
pub use step_fn::{StepFunction, StepFunctionSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RotationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("requested depth {requested} exceeds available {available}")]
    DepthExceeded { requested: usize, available: usize },
    #[error("step function is not centered (integral {0})")]
    NotCentered(String),
    #[error("special-flow invariant violated: {0}")]
    Invariant(String),
    #[error("step budget of {0} exhausted")]
    BudgetExhausted(u64),
    #[error("cocycle value overflow")]
    Overflow,
}
