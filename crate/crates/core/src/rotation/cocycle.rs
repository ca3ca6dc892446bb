//! Ergodic sums of a step function over an irrational rotation.

use serde::Serialize;

use super::angle::Angle;
use super::cf::ContinuedFraction;
use super::step_fn::{StepFunction, StepFunctionSpec};
use super::RotationError;
use crate::site::LatticeSite;
use crate::sources::{SiteSource, SourceError};

/// Streams `z_k = S_k f(x) = Σ_{j<k} f(x + jα mod 1)` for `k = 1, 2, …`.
#[derive(Debug, Clone)]
pub struct RotationCocycle {
    alpha: Angle,
    point: Angle,
    f: StepFunction,
    sum: i64,
    steps: u64,
    near_breakpoint_hits: u64,
}

impl RotationCocycle {
    pub fn new(
        cf: &ContinuedFraction,
        f: &StepFunctionSpec,
        x: Angle,
    ) -> Result<Self, RotationError> {
        let (p, q) = cf.deep_convergent();
        let alpha = Angle::from_fraction(p % q, q)
            .ok_or_else(|| RotationError::Config("bad rotation number".into()))?;
        Ok(Self::with_alpha(alpha, f.compile()?, x))
    }

    pub fn with_alpha(alpha: Angle, f: StepFunction, x: Angle) -> Self {
        Self {
            alpha,
            point: x,
            f,
            sum: 0,
            steps: 0,
            near_breakpoint_hits: 0,
        }
    }

    pub fn alpha(&self) -> Angle {
        self.alpha
    }

    /// Number of evaluations closer to a breakpoint than the accumulated
    /// fixed-point error bound.
    pub fn near_breakpoint_hits(&self) -> u64 {
        self.near_breakpoint_hits
    }

    #[inline]
    pub fn next_sum(&mut self) -> Result<i64, RotationError> {
        let (v, dist) = self.f.eval(self.point);
        // Each addition truncates by at most one raw unit.
        if dist <= 2 * (self.steps as u128 + 2) {
            self.near_breakpoint_hits += 1;
        }
        self.sum = self.sum.checked_add(v).ok_or(RotationError::Overflow)?;
        self.point = self.point.wrapping_add(self.alpha);
        self.steps += 1;
        Ok(self.sum)
    }
}

impl SiteSource for RotationCocycle {
    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn next_site(&mut self) -> Result<LatticeSite, SourceError> {
        Ok(LatticeSite::scalar(self.next_sum()?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DenjoyKoksmaReport {
    /// `(k, q_k, S_{q_k} f(x))` for `k = 1..=depth`.
    pub sums: Vec<(usize, u128, i64)>,
    pub max_abs: u64,
    pub total_variation: u64,
    pub circle_variation: u64,
}

/// Largest allowed `q_K` for a Denjoy–Koksma scan.
pub const DK_MAX_LENGTH: u128 = 1 << 32;

/// `max_{k≤K} |S_{q_k} f(x)|` for a centered step function.
pub fn denjoy_koksma_check(
    cf: &ContinuedFraction,
    f: &StepFunctionSpec,
    x: Angle,
    depth: usize,
) -> Result<DenjoyKoksmaReport, RotationError> {
    let compiled = f.compile()?;
    if !compiled.is_centered() {
        let (n, d) = compiled.integral();
        return Err(RotationError::NotCentered(format!("{n}/{d}")));
    }
    let qs = cf.denominators(depth)?;
    let last = *qs
        .last()
        .ok_or_else(|| RotationError::Config("depth must be positive".into()))?;
    if last > DK_MAX_LENGTH {
        return Err(RotationError::Config(format!(
            "q_{depth} = {last} exceeds the scan limit"
        )));
    }
    let total_variation = compiled.total_variation();
    let circle_variation = compiled.circle_variation();
    let mut stream = RotationCocycle::new(cf, f, x)?;
    let mut sums = Vec::with_capacity(depth);
    let mut t = 0u128;
    let mut sum = 0;
    for (k, &q) in qs.iter().enumerate() {
        while t < q {
            sum = stream.next_sum()?;
            t += 1;
        }
        sums.push((k + 1, q, sum));
    }
    let max_abs = sums.iter().map(|s| s.2.unsigned_abs()).max().unwrap_or(0);
    Ok(DenjoyKoksmaReport {
        sums,
        max_abs,
        total_variation,
        circle_variation,
    })
}
