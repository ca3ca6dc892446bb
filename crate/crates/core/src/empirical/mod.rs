//! Empirical distributions sampled along a sequence and the normalized
//! bridge process `Y_n(s) = W_n(s) / √V_n`.

mod kolmogorov;
mod mc;

use serde::Serialize;
use thiserror::Error;

use crate::fields::{FieldError, FieldSpec};
use crate::ledger::{LedgerError, LocalTimeLedger};
use crate::sources::{RunError, SiteSource, SourceError};

pub use kolmogorov::{kolmogorov_cdf, kolmogorov_quantile};
pub use mc::{mc_fclt, CovarianceEntry, FcltConfig, FcltReport, SeedMode, MIN_REPLICATES};

#[derive(Debug, Error)]
pub enum EmpiricalError {
    #[error("ledger is empty")]
    EmptyLedger,
    #[error("grid point {0} outside [0, 1]")]
    GridOutOfRange(f64),
    #[error("grid must be sorted and nonempty")]
    BadGrid,
    #[error("field distribution is not supported in [0, 1]")]
    FieldNotInUnitInterval,
    #[error("replicates < {min} (got {got})")]
    TooFewReplicates { got: usize, min: usize },
    #[error("n = {n} too small for a grid of {grid} points")]
    NTooSmall { n: u64, grid: usize },
    #[error("checkpoint n = {0} is below 16")]
    CheckpointTooSmall(u64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl From<RunError> for EmpiricalError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Source(e) => e.into(),
            RunError::Ledger(e) => e.into(),
        }
    }
}

/// Jumps `(value, multiplicity)` of `F_n`, values strictly increasing; the
/// weight of a jump is `multiplicity / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEcdf {
    jumps: Vec<(f64, u64)>,
    n: u64,
}

impl WeightedEcdf {
    /// Merges equal values; `counts` must be positive.
    pub fn from_counts(mut pairs: Vec<(f64, u64)>) -> Result<Self, EmpiricalError> {
        pairs.retain(|p| p.1 > 0);
        if pairs.is_empty() {
            return Err(EmpiricalError::EmptyLedger);
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut jumps: Vec<(f64, u64)> = Vec::with_capacity(pairs.len());
        for (v, c) in pairs {
            match jumps.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => jumps.push((v, c)),
            }
        }
        let n = jumps.iter().map(|j| j.1).sum();
        Ok(Self { jumps, n })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn jumps(&self) -> &[(f64, u64)] {
        &self.jumps
    }

    /// `(value, weight)` pairs.
    pub fn weighted_jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.n as f64;
        self.jumps.iter().map(move |&(v, c)| (v, c as f64 / n))
    }

    /// `Σ_ℓ N(ℓ) 1_{X_ℓ ≤ s}`.
    pub fn count_le(&self, s: f64) -> u64 {
        let k = self.jumps.partition_point(|j| j.0 <= s);
        self.jumps[..k].iter().map(|j| j.1).sum()
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.count_le(s) as f64 / self.n as f64
    }
}

/// Evaluates the field once per distinct visited site; visit counts become
/// ECDF weights.
pub fn sampled_ecdf(
    spec: &FieldSpec,
    seed: u64,
    ledger: &LocalTimeLedger,
) -> Result<WeightedEcdf, EmpiricalError> {
    if ledger.n() == 0 {
        return Err(EmpiricalError::EmptyLedger);
    }
    let pairs = ledger
        .counts()
        .map(|(site, &c)| (spec.site_value(seed, site), c))
        .collect();
    WeightedEcdf::from_counts(pairs)
}

/// `sup_s |F_n(s) - F(s)|`, attained at a jump of `F_n` or the left limit of
/// the next one.
pub fn sup_deviation(ecdf: &WeightedEcdf, spec: &FieldSpec) -> f64 {
    let n = ecdf.n as f64;
    let mut acc = 0u64;
    let mut best = spec.cdf_left(ecdf.jumps[0].0);
    for (i, &(v, c)) in ecdf.jumps.iter().enumerate() {
        acc += c;
        let fn_v = acc as f64 / n;
        best = best.max((fn_v - spec.cdf(v)).abs());
        let next_left = match ecdf.jumps.get(i + 1) {
            Some(&(w, _)) => spec.cdf_left(w),
            None => 1.0,
        };
        best = best.max((fn_v - next_left).abs());
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeSample {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `√V_n`.
    pub normalizer: f64,
}

fn check_grid(grid: &[f64]) -> Result<(), EmpiricalError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(EmpiricalError::BadGrid);
    }
    if let Some(&s) = grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(EmpiricalError::GridOutOfRange(s));
    }
    Ok(())
}

/// `Y_n(s) = (Σ_ℓ N(ℓ) 1_{X_ℓ ≤ s} - n F(s)) / √V_n` on `grid`.
pub fn bridge_from_ecdf(
    ecdf: &WeightedEcdf,
    spec: &FieldSpec,
    self_intersections: u128,
    grid: &[f64],
) -> Result<BridgeSample, EmpiricalError> {
    check_grid(grid)?;
    if !spec.supported_in_unit_interval() {
        return Err(EmpiricalError::FieldNotInUnitInterval);
    }
    let norm = (self_intersections as f64).sqrt();
    let n = ecdf.n as f64;
    let values = grid
        .iter()
        .map(|&s| (ecdf.count_le(s) as f64 - n * spec.cdf(s)) / norm)
        .collect();
    Ok(BridgeSample {
        grid: grid.to_vec(),
        values,
        normalizer: norm,
    })
}

pub fn bridge_values(
    spec: &FieldSpec,
    seed: u64,
    ledger: &LocalTimeLedger,
    grid: &[f64],
) -> Result<BridgeSample, EmpiricalError> {
    let ecdf = sampled_ecdf(spec, seed, ledger)?;
    bridge_from_ecdf(&ecdf, spec, ledger.self_intersections(), grid)
}

/// `sup_s |Y_n(s)| = n · sup_s |F_n - F| / √V_n`.
pub fn bridge_sup(ecdf: &WeightedEcdf, spec: &FieldSpec, self_intersections: u128) -> f64 {
    ecdf.n as f64 * sup_deviation(ecdf, spec) / (self_intersections as f64).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct LilRow {
    pub n: u64,
    /// `|Σ_k (1_{X_{z_k} ≤ s} - F(s))|`.
    pub deviation: f64,
    pub sqrt_v: f64,
    /// Deviation of the standardized indicators over `√V_n (2 log log n)^{1/2}`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LilReport {
    pub s: f64,
    pub cdf: f64,
    /// Uniform bound of the standardized indicator `(1_{X≤s} - F(s)) / σ(s)`.
    pub k: f64,
    pub rows: Vec<LilRow>,
    pub final_ratio: f64,
    /// `final_ratio ≤ 1.5 K`.
    pub within_margin: bool,
}

pub const LIL_SLACK: f64 = 0.5;

/// Tracks the centered indicator sums along the sequence and their
/// iterated-logarithm normalization at each checkpoint.
pub fn lln_bound_check(
    field: &FieldSpec,
    field_seed: u64,
    source: &mut dyn SiteSource,
    s: f64,
    checkpoints: &[u64],
) -> Result<LilReport, EmpiricalError> {
    field.validate()?;
    if field.bound().is_none() {
        return Err(FieldError::Unbounded.into());
    }
    if let Some(&c) = checkpoints.iter().find(|&&c| c < 16) {
        return Err(EmpiricalError::CheckpointTooSmall(c));
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EmpiricalError::BadGrid);
    }
    let f = field.cdf(s);
    let sigma = (f * (1.0 - f)).sqrt();
    let k = if sigma > 0.0 {
        f.max(1.0 - f) / sigma
    } else {
        0.0
    };
    let mut ledger = LocalTimeLedger::new(source.dim())?;
    let mut below = 0u64;
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    while let Some(&&target) = next.peek() {
        let site = source.next_site()?;
        ledger.record(site)?;
        if field.site_value(field_seed, &site) <= s {
            below += 1;
        }
        if ledger.n() == target {
            let n = target as f64;
            let deviation = (below as f64 - n * f).abs();
            let sqrt_v = (ledger.self_intersections() as f64).sqrt();
            let scale = sqrt_v * (2.0 * n.ln().ln()).sqrt();
            let ratio = if sigma > 0.0 {
                deviation / sigma / scale
            } else {
                0.0
            };
            rows.push(LilRow {
                n: target,
                deviation,
                sqrt_v,
                ratio,
            });
            next.next();
        }
    }
    let final_ratio = rows.last().map_or(0.0, |r| r.ratio);
    Ok(LilReport {
        s,
        cdf: f,
        k,
        within_margin: final_ratio <= (1.0 + LIL_SLACK) * k,
        rows,
        final_ratio,
    })
}
