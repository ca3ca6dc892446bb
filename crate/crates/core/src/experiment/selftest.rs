//! Oracle suites behind `selab selftest`.

use rand::Rng;

use super::{fmt_f64, Check, ExperimentError, Table};
use crate::empirical::kolmogorov_cdf;
use crate::fields::FieldSpec;
use crate::ledger::{brute_force_stats, LocalTimeLedger};
use crate::rng::{sequence_seed, stream_rng};
use crate::rotation::{Angle, ContinuedFraction, RotationCocycle, StepFunctionSpec};
use crate::sources::{take_sites, SourceSpec, StepDistribution};
use crate::spectral::{parseval_check, psi_phi, quadratic_form};

const SEED: u64 = 0x5e1f_7e57;

type Suite = fn() -> Result<Check, ExperimentError>;

const SUITES: [Suite; 8] = [
    streaming_vs_brute,
    kolmogorov_dual,
    convergent_inequality,
    parseval,
    quadratic_iid,
    phi_cot2,
    rotation_rational,
    three_distance,
];

pub fn run_selftest() -> Result<(Vec<Check>, Table), ExperimentError> {
    let checks: Vec<Check> = SUITES.iter().map(|s| s()).collect::<Result<_, _>>()?;
    let table = Table::build(
        "selftest.csv",
        &["suite", "op", "passed", "value", "threshold"],
        checks.iter().map(|c| {
            vec![
                c.name.clone(),
                c.op.to_string(),
                c.passed.to_string(),
                fmt_f64(c.value),
                c.threshold.clone(),
            ]
        }),
    )?;
    Ok((checks, table))
}

fn walk_ledger(
    dim: usize,
    n: usize,
    seed: u64,
) -> Result<(LocalTimeLedger, Vec<crate::LatticeSite>), ExperimentError> {
    let mut src = SourceSpec::SimpleWalk { dim }.build(seed)?;
    let sites = take_sites(&mut *src, n)?;
    let mut l = LocalTimeLedger::new(dim)?;
    l.extend(sites.iter().copied())?;
    Ok((l, sites))
}

fn streaming_vs_brute() -> Result<Check, ExperimentError> {
    let mut mismatches = 0;
    for i in 0..20u64 {
        let (l, sites) = walk_ledger(
            1 + (i % 2) as usize,
            300 + 17 * i as usize,
            sequence_seed(SEED, i),
        )?;
        let b = brute_force_stats(&sites)?;
        let same = l.self_intersections() == b.self_intersections
            && l.max_count() == b.max_count
            && b.counts.iter().all(|(s, &c)| l.count(s) == c)
            && l.range() as usize == b.counts.len();
        mismatches += usize::from(!same);
    }
    Ok(Check::new(
        "streaming_vs_brute",
        "site_ledger.brute_force_stats",
        mismatches == 0,
        mismatches as f64,
        "0 mismatches in 20",
    ))
}

/// `P(K ≤ x)` through the Jacobi-transformed series, which converges fast for small `x`.
fn kolmogorov_theta(x: f64) -> f64 {
    let c = (std::f64::consts::TAU).sqrt() / x;
    let pi2 = std::f64::consts::PI.powi(2);
    (1..=50)
        .map(|k| ((2 * k - 1) as f64).powi(2))
        .map(|m| (-m * pi2 / (8.0 * x * x)).exp())
        .sum::<f64>()
        * c
}

fn kolmogorov_dual() -> Result<Check, ExperimentError> {
    let worst = (3..=30)
        .map(|i| i as f64 / 10.0)
        .map(|x| (kolmogorov_cdf(x) - kolmogorov_theta(x)).abs())
        .fold(0.0, f64::max);
    Ok(Check::new(
        "kolmogorov_dual",
        "empirical_process.kolmogorov_cdf",
        worst <= 1e-12,
        worst,
        "≤ 1e-12",
    ))
}

fn alpha_angle(cf: &ContinuedFraction) -> Angle {
    let (p, q) = cf.deep_convergent();
    Angle::from_fraction(p % q, q).expect("valid rotation number")
}

fn convergent_inequality() -> Result<Check, ExperimentError> {
    let cfs = [
        ContinuedFraction::golden(),
        ContinuedFraction::silver(),
        ContinuedFraction::repeating(vec![1, 2, 3, 4])?,
        ContinuedFraction::repeating(vec![7, 1])?,
    ];
    let mut violations = 0u32;
    for cf in &cfs {
        let alpha = alpha_angle(cf);
        let conv = cf.convergents(30)?;
        for w in conv.windows(2) {
            let ((p, q), (_, q_next)) = (w[0], w[1]);
            let Some(qq) = q.checked_mul(q_next).filter(|&v| v < 1 << 100) else {
                break;
            };
            let d = alpha.circle_distance(Angle::from_fraction(p % q, q).expect("q > 0"));
            // |α - p/q| < 1/(q q') in units of 2^-128
            if d.checked_mul(qq).is_none_or(|v| v == u128::MAX) {
                violations += 1;
            }
        }
    }
    Ok(Check::new(
        "convergent_inequality",
        "rotation_cocycles.convergents",
        violations == 0,
        violations as f64,
        "|α - p/q| < 1/(q q')",
    ))
}

fn parseval() -> Result<Check, ExperimentError> {
    let mut worst = 0.0f64;
    for i in 0..5u64 {
        let (l, _) = walk_ledger(1 + (i % 2) as usize, 150, sequence_seed(SEED ^ 1, i))?;
        worst = worst.max(parseval_check(&l)?.relative_error);
    }
    Ok(Check::new(
        "parseval",
        "spectral_variance.parseval_check",
        worst < 1e-9,
        worst,
        "< 1e-9",
    ))
}

fn quadratic_iid() -> Result<Check, ExperimentError> {
    let field = FieldSpec::IidUniform01;
    let mut worst = 0.0f64;
    for i in 0..5u64 {
        let (l, _) = walk_ledger(2, 400, sequence_seed(SEED ^ 2, i))?;
        let q = quadratic_form(&l, &field)?;
        worst = worst.max((q.value - field.variance() * l.self_intersections() as f64).abs());
    }
    Ok(Check::new(
        "quadratic_iid",
        "spectral_variance.quadratic_form",
        worst == 0.0,
        worst,
        "= Var · V",
    ))
}

fn phi_cot2() -> Result<Check, ExperimentError> {
    let dist = StepDistribution::simple_1d();
    let mut rng = stream_rng(SEED ^ 3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let t: f64 = rng.random_range(1e-3..1.0 - 1e-3);
        let cot2 = (std::f64::consts::PI * t).tan().powi(-2);
        let phi = psi_phi(&dist, &[t], None)?.phi;
        worst = worst.max((phi - cot2).abs() / cot2.max(1.0));
    }
    Ok(Check::new(
        "phi_cot2",
        "spectral_variance.psi_phi",
        worst <= 1e-10,
        worst,
        "≤ 1e-10 · max(1, cot²)",
    ))
}

fn rotation_rational() -> Result<Check, ExperimentError> {
    let f = StepFunctionSpec::sign_halves();
    let compiled = f.compile()?;
    let mut mismatches = 0u32;
    // Even q and start 1/(2q) keep every orbit point off the breakpoints 0 and 1/2.
    for (p, q) in [(89u128, 144u128), (377, 610), (13, 34), (5, 8)] {
        let den = 2 * q;
        let alpha = Angle::from_fraction(p, q).expect("q > 0");
        let mut c = RotationCocycle::with_alpha(
            alpha,
            compiled.clone(),
            Angle::from_fraction(1, den).expect("den > 0"),
        );
        let mut num = 1u128;
        let mut exact = 0i64;
        for _ in 0..10_000 {
            exact += compiled.eval_rational(num, den);
            num = (num + 2 * p) % den;
            if c.next_sum()? != exact {
                mismatches += 1;
            }
        }
    }
    Ok(Check::new(
        "rotation_rational",
        "rotation_cocycles.rotation_cocycle",
        mismatches == 0,
        mismatches as f64,
        "0 mismatches",
    ))
}

fn three_distance() -> Result<Check, ExperimentError> {
    let mut worst = 0usize;
    for cf in [ContinuedFraction::golden(), ContinuedFraction::silver()] {
        let alpha = alpha_angle(&cf);
        for n in [10u128, 100, 987, 1000] {
            let mut pts: Vec<u128> = (0..n).map(|j| alpha.times(j).0).collect();
            pts.sort_unstable();
            let mut gaps: Vec<u128> = pts.windows(2).map(|w| w[1] - w[0]).collect();
            gaps.push(pts[0].wrapping_sub(pts[pts.len() - 1]));
            gaps.sort_unstable();
            gaps.dedup();
            worst = worst.max(gaps.len());
        }
    }
    Ok(Check::new(
        "three_distance",
        "rotation_cocycles.rotation_cocycle",
        worst <= 3,
        worst as f64,
        "≤ 3 distinct gaps",
    ))
}
