//! Monte Carlo check of the bridge covariance `F(s ∧ t) - F(s)F(t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bridge_from_ecdf, bridge_sup, check_grid, sampled_ecdf, EmpiricalError};
use crate::conditions::{condition_report, Checkpoint, ConditionReport};
use crate::fields::FieldSpec;
use crate::ledger::LocalTimeLedger;
use crate::rng::{field_seed, sequence_seed};
use crate::sources::{fill_ledger, SourceSpec};

pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// One sequence shared by all replicates; only the field is redrawn.
    #[default]
    Quenched,
    /// Fresh sequence and field per replicate.
    Annealed,
}

#[derive(Debug, Clone)]
pub struct FcltConfig {
    pub field: FieldSpec,
    pub source: SourceSpec,
    pub n: u64,
    pub grid: Vec<f64>,
    pub replicates: usize,
    pub seed_base: u64,
    pub mode: SeedMode,
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceEntry {
    pub s: f64,
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    /// `|estimate - target| / stderr`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FcltReport {
    pub n: u64,
    pub replicates: usize,
    pub mode: SeedMode,
    pub grid: Vec<f64>,
    /// Upper triangle `s ≤ t`, row-major.
    pub covariance: Vec<CovarianceEntry>,
    /// `sup_s |Y_n(s)|` per replicate, in replicate order.
    pub sup_sample: Vec<f64>,
    pub sup_q95: f64,
    /// `M²/V` of the shared sequence (quenched) or the replicate mean.
    pub m2_over_v: f64,
    /// Diagnostics of the shared sequence, when it has enough checkpoints.
    pub condition: Option<ConditionReport>,
    pub warnings: Vec<String>,
}

/// Three log-spaced checkpoints ending at `n`, for the condition report.
fn diagnostic_checkpoints(n: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = [n / 100, n / 10, n]
        .into_iter()
        .filter(|&c| c >= 16)
        .collect();
    cps.dedup();
    cps
}

struct Replicate {
    y: Vec<f64>,
    sup: f64,
    m2_over_v: f64,
}

fn replicate(
    cfg: &FcltConfig,
    ledger: &LocalTimeLedger,
    field_seed: u64,
) -> Result<Replicate, EmpiricalError> {
    let ecdf = sampled_ecdf(&cfg.field, field_seed, ledger)?;
    let b = bridge_from_ecdf(&ecdf, &cfg.field, ledger.self_intersections(), &cfg.grid)?;
    Ok(Replicate {
        y: b.values,
        sup: bridge_sup(&ecdf, &cfg.field, ledger.self_intersections()),
        m2_over_v: ledger.m2_over_v(),
    })
}

/// Unbiased covariance of two columns with its jackknife standard error.
fn jackknife_cov(x: &[f64], y: &[f64]) -> (f64, f64) {
    let r = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let cov = |sx: f64, sy: f64, sxy: f64, m: f64| (sxy - sx * sy / m) / (m - 1.0);
    let full = cov(sx, sy, sxy, r);
    let loo: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| cov(sx - a, sy - b, sxy - a * b, r - 1.0))
        .collect();
    let mean = loo.iter().sum::<f64>() / r;
    let var = (r - 1.0) / r * loo.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>();
    (full, var.sqrt())
}

/// Empirical 95% quantile by the nearest-rank rule.
fn q95(sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub fn mc_fclt(cfg: &FcltConfig) -> Result<FcltReport, EmpiricalError> {
    if cfg.replicates < MIN_REPLICATES {
        return Err(EmpiricalError::TooFewReplicates {
            got: cfg.replicates,
            min: MIN_REPLICATES,
        });
    }
    check_grid(&cfg.grid)?;
    if cfg.n < cfg.grid.len() as u64 {
        return Err(EmpiricalError::NTooSmall {
            n: cfg.n,
            grid: cfg.grid.len(),
        });
    }
    cfg.field.validate()?;
    if !cfg.field.supported_in_unit_interval() {
        return Err(EmpiricalError::FieldNotInUnitInterval);
    }

    let mut warnings = Vec::new();
    let reps: Vec<Replicate>;
    let mut condition = None;
    let m2_over_v;
    match cfg.mode {
        SeedMode::Quenched => {
            let mut src = cfg.source.build(sequence_seed(cfg.seed_base, 0))?;
            let cps = diagnostic_checkpoints(cfg.n);
            let (ledger, snaps) = fill_ledger(&mut *src, cfg.n, &cps)?;
            if snaps.len() >= 3 {
                let c: Vec<Checkpoint> = snaps.into_iter().map(Checkpoint::from).collect();
                condition = condition_report(&c).ok();
            }
            m2_over_v = ledger.m2_over_v();
            reps = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| replicate(cfg, &ledger, field_seed(cfg.seed_base, r as u64)))
                .collect::<Result<_, _>>()?;
        }
        SeedMode::Annealed => {
            reps = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| {
                    let mut src = cfg.source.build(sequence_seed(cfg.seed_base, r as u64))?;
                    let (ledger, _) = fill_ledger(&mut *src, cfg.n, &[])?;
                    replicate(cfg, &ledger, field_seed(cfg.seed_base, r as u64))
                })
                .collect::<Result<_, EmpiricalError>>()?;
            m2_over_v = reps.iter().map(|r| r.m2_over_v).sum::<f64>() / reps.len() as f64;
        }
    }
    match &condition {
        Some(c) if !c.fclt_flag => warnings.push(format!(
            "M^2/V = {m2_over_v:.4} not clearly vanishing; bridge limit may not apply"
        )),
        None if m2_over_v >= crate::conditions::FCLT_THRESHOLD => warnings.push(format!(
            "M^2/V = {m2_over_v:.4} above {}",
            crate::conditions::FCLT_THRESHOLD
        )),
        _ => {}
    }

    let g = cfg.grid.len();
    let cols: Vec<Vec<f64>> = (0..g)
        .map(|i| reps.iter().map(|r| r.y[i]).collect())
        .collect();
    let mut covariance = Vec::with_capacity(g * (g + 1) / 2);
    for i in 0..g {
        for j in i..g {
            let (s, t) = (cfg.grid[i], cfg.grid[j]);
            let (estimate, stderr) = jackknife_cov(&cols[i], &cols[j]);
            let target = cfg.field.cdf(s.min(t)) - cfg.field.cdf(s) * cfg.field.cdf(t);
            let z = if stderr > 0.0 {
                (estimate - target).abs() / stderr
            } else {
                f64::INFINITY
            };
            covariance.push(CovarianceEntry {
                s,
                t,
                estimate,
                stderr,
                target,
                z,
            });
        }
    }
    let sup_sample: Vec<f64> = reps.iter().map(|r| r.sup).collect();
    Ok(FcltReport {
        n: cfg.n,
        replicates: cfg.replicates,
        mode: cfg.mode,
        grid: cfg.grid.clone(),
        covariance,
        sup_q95: q95(&sup_sample),
        sup_sample,
        m2_over_v,
        condition,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_matches_closed_form_for_variance() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let (c, se) = jackknife_cov(&x, &x);
        let m = x.iter().sum::<f64>() / 50.0;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 49.0;
        assert!((c - var).abs() < 1e-12);
        assert!(se > 0.0);
    }

    #[test]
    fn nearest_rank_quantile() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(q95(&v), 95.0);
    }

    #[test]
    fn rejects_small_replicate_counts() {
        let cfg = FcltConfig {
            field: FieldSpec::IidUniform01,
            source: SourceSpec::SimpleWalk { dim: 2 },
            n: 100,
            grid: vec![0.5],
            replicates: 10,
            seed_base: 1,
            mode: SeedMode::Quenched,
        };
        let e = mc_fclt(&cfg).unwrap_err();
        assert!(e.to_string().contains("replicates < 100"));
    }

    #[test]
    fn quenched_variance_is_bernoulli() {
        let cfg = FcltConfig {
            field: FieldSpec::IidUniform01,
            source: SourceSpec::SimpleWalk { dim: 2 },
            n: 2000,
            grid: vec![0.25, 0.5],
            replicates: 400,
            seed_base: 3,
            mode: SeedMode::Quenched,
        };
        let r = mc_fclt(&cfg).unwrap();
        assert_eq!(r.covariance.len(), 3);
        for c in &r.covariance {
            assert!(c.z < 5.0, "{c:?}");
        }
        assert_eq!(r.sup_sample.len(), 400);
        let again = mc_fclt(&cfg).unwrap();
        assert_eq!(again.sup_sample, r.sup_sample);
    }
}
