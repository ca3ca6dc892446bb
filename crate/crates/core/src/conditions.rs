//! Finite-sample diagnostics for the growth conditions on `V_n` and `M_n`.

use serde::Serialize;
use thiserror::Error;

use crate::ledger::Snapshot;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionError {
    #[error("need at least 3 checkpoints, got {0}")]
    TooFewCheckpoints(usize),
    #[error("checkpoint n values must be strictly increasing (at index {0})")]
    NonMonotone(usize),
    #[error("checkpoint n = {0} is below 16")]
    TooSmall(u64),
    #[error("checkpoint at n = {0} has V = 0")]
    ZeroV(u64),
}

/// `(n, M_n, V_n, Σ_{k≤n} M_k/k²)` at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n: u64,
    pub max_count: u64,
    pub self_intersections: u128,
    pub pqd_partial_sum: f64,
}

impl From<Snapshot> for Checkpoint {
    fn from(s: Snapshot) -> Self {
        Self {
            n: s.n,
            max_count: s.max_count,
            self_intersections: s.self_intersections,
            pqd_partial_sum: s.pqd_partial_sum,
        }
    }
}

impl Checkpoint {
    pub fn m2_over_v(&self) -> f64 {
        let m = self.max_count as f64;
        m * m / self.self_intersections as f64
    }

    pub fn n2_over_v(&self) -> f64 {
        let n = self.n as f64;
        n * n / self.self_intersections as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointRow {
    pub n: u64,
    pub max_count: u64,
    pub self_intersections: u128,
    pub m2_over_v: f64,
    pub n2_over_v: f64,
    pub pqd_partial_sum: f64,
}

/// Where the fitted exponent sits relative to the thresholds 1 and 2 of the
/// `V_n ≤ C n² / (log n)^β` law-of-large-numbers criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaRegime {
    /// β > 2: every ζ ∈ [1, 2] is admissible.
    AboveTwo,
    /// 1 < β ≤ 2: admissible for ζ < β only.
    BetweenOneAndTwo,
    /// β ≤ 1: the logarithmic rate is too weak.
    AtMostOne,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub checkpoints: Vec<CheckpointRow>,
    pub beta_fit: f64,
    pub zeta_regime: ZetaRegime,
    pub zeta_note: String,
    /// Slope of `log(n²/V)` against `log n`; a clearly positive value means
    /// `V_n` is polynomially below `n²`, so the logarithmic model underfits.
    pub polynomial_slope: f64,
    pub fclt_flag: bool,
    pub pqd_flag: bool,
}

pub const FCLT_THRESHOLD: f64 = 0.1;
pub const PQD_RATIO: f64 = 0.9;

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

pub fn condition_report(checkpoints: &[Checkpoint]) -> Result<ConditionReport, ConditionError> {
    if checkpoints.len() < 3 {
        return Err(ConditionError::TooFewCheckpoints(checkpoints.len()));
    }
    for (i, c) in checkpoints.iter().enumerate() {
        if c.n < 16 {
            return Err(ConditionError::TooSmall(c.n));
        }
        if c.self_intersections == 0 {
            return Err(ConditionError::ZeroV(c.n));
        }
        if i > 0 && c.n <= checkpoints[i - 1].n {
            return Err(ConditionError::NonMonotone(i));
        }
    }

    let log_n: Vec<f64> = checkpoints.iter().map(|c| (c.n as f64).ln()).collect();
    let loglog_n: Vec<f64> = log_n.iter().map(|l| l.ln()).collect();
    let log_ratio: Vec<f64> = checkpoints.iter().map(|c| c.n2_over_v().ln()).collect();
    let beta_fit = ls_slope(&loglog_n, &log_ratio);
    let polynomial_slope = ls_slope(&log_n, &log_ratio);

    let zeta_regime = if beta_fit > 2.0 {
        ZetaRegime::AboveTwo
    } else if beta_fit > 1.0 {
        ZetaRegime::BetweenOneAndTwo
    } else {
        ZetaRegime::AtMostOne
    };
    let mut zeta_note = match zeta_regime {
        ZetaRegime::AboveTwo => {
            format!("beta_fit = {beta_fit:.3} > 2: LLN holds for every zeta in [1,2]")
        }
        ZetaRegime::BetweenOneAndTwo => {
            format!("1 < beta_fit = {beta_fit:.3} <= 2: LLN holds for zeta < beta_fit only")
        }
        ZetaRegime::AtMostOne => {
            format!("beta_fit = {beta_fit:.3} <= 1: logarithmic rate insufficient")
        }
    };
    if polynomial_slope > 0.25 {
        zeta_note.push_str(&format!(
            "; n^2/V grows polynomially (slope {polynomial_slope:.3} in log n), V far below the log model"
        ));
    }

    let tail = &checkpoints[checkpoints.len() - 3..];
    let ratios: Vec<f64> = tail.iter().map(Checkpoint::m2_over_v).collect();
    let fclt_flag = ratios.windows(2).all(|w| w[1] < w[0]) && ratios[2] < FCLT_THRESHOLD;

    let d1 = tail[1].pqd_partial_sum - tail[0].pqd_partial_sum;
    let d2 = tail[2].pqd_partial_sum - tail[1].pqd_partial_sum;
    let pqd_flag = if d1 > 0.0 {
        d2 / d1 < PQD_RATIO
    } else {
        d2 <= 0.0
    };

    let rows = checkpoints
        .iter()
        .map(|c| CheckpointRow {
            n: c.n,
            max_count: c.max_count,
            self_intersections: c.self_intersections,
            m2_over_v: c.m2_over_v(),
            n2_over_v: c.n2_over_v(),
            pqd_partial_sum: c.pqd_partial_sum,
        })
        .collect();

    Ok(ConditionReport {
        checkpoints: rows,
        beta_fit,
        zeta_regime,
        zeta_note,
        polynomial_slope,
        fclt_flag,
        pqd_flag,
    })
}

/// Default checkpoints: powers of ten from 10³ up to and including `n_max`.
pub fn decade_checkpoints(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = 1_000u64;
    while n <= n_max {
        out.push(n);
        match n.checked_mul(10) {
            Some(m) => n = m,
            None => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(n: u64, m: u64, v: u128, pqd: f64) -> Checkpoint {
        Checkpoint {
            n,
            max_count: m,
            self_intersections: v,
            pqd_partial_sum: pqd,
        }
    }

    #[test]
    fn constant_sequence_fails_fclt() {
        let c: Vec<_> = [100u64, 1000, 10000]
            .iter()
            .map(|&n| cp(n, n, (n as u128) * (n as u128), 0.0))
            .collect();
        let r = condition_report(&c).unwrap();
        assert!(!r.fclt_flag);
        assert!(r.beta_fit.abs() < 1e-12);
    }

    #[test]
    fn distinct_sequence_passes_fclt_and_flags_model() {
        let c: Vec<_> = [1000u64, 10_000, 100_000]
            .iter()
            .map(|&n| cp(n, 1, n as u128, 0.0))
            .collect();
        let r = condition_report(&c).unwrap();
        assert!(r.fclt_flag);
        // n²/V = n, so the regression against log log n is steep.
        assert!(r.beta_fit > 2.0);
        assert!((r.polynomial_slope - 1.0).abs() < 1e-12);
        assert!(r.zeta_note.contains("polynomially"));
    }

    #[test]
    fn validation_errors() {
        let ok = cp(100, 1, 100, 0.0);
        assert_eq!(
            condition_report(&[ok, ok]).unwrap_err(),
            ConditionError::TooFewCheckpoints(2)
        );
        let c = [
            cp(100, 1, 100, 0.0),
            cp(50, 1, 50, 0.0),
            cp(200, 1, 200, 0.0),
        ];
        assert_eq!(
            condition_report(&c).unwrap_err(),
            ConditionError::NonMonotone(1)
        );
        let c = [cp(10, 1, 10, 0.0), cp(50, 1, 50, 0.0), cp(200, 1, 200, 0.0)];
        assert_eq!(
            condition_report(&c).unwrap_err(),
            ConditionError::TooSmall(10)
        );
    }

    #[test]
    fn pqd_flag_geometric_decrease() {
        let c = [
            cp(100, 1, 100, 1.0),
            cp(1000, 1, 1000, 1.5),
            cp(10000, 1, 10000, 1.6),
        ];
        assert!(condition_report(&c).unwrap().pqd_flag);
        let c = [
            cp(100, 1, 100, 1.0),
            cp(1000, 1, 1000, 1.5),
            cp(10000, 1, 10000, 2.0),
        ];
        assert!(!condition_report(&c).unwrap().pqd_flag);
    }

    #[test]
    fn decades() {
        assert_eq!(
            decade_checkpoints(1_000_000),
            vec![1_000, 10_000, 100_000, 1_000_000]
        );
        assert!(decade_checkpoints(999).is_empty());
    }
}
