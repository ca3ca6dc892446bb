//! Sequence kernels on the torus, characteristic functions of step laws,
//! return probabilities by convolution, and the transient variance limit.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{FieldError, FieldSpec};
use crate::ledger::{LedgerError, LocalTimeLedger};
use crate::rng::sequence_seed;
use crate::site::{LatticeSite, MAX_DIM};
use crate::sources::{fill_ledger, Recurrence, RunError, StepDistribution};
use crate::sources::{RandomWalk, SourceError};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("not aperiodic at t = {0:?}")]
    NotAperiodic(Vec<f64>),
    #[error("lambda must lie in [0, 1), got {0}")]
    BadLambda(f64),
    #[error("torus point has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("convolution box needs {needed} bytes, budget is {budget}")]
    MemoryBudget { needed: u128, budget: u128 },
    #[error("law is not transient ({0:?})")]
    NotTransient(Recurrence),
    #[error("replicates must be at least 2")]
    TooFewReplicates,
    #[error("quadrature modulus must exceed the site diameter {0}")]
    ModulusTooSmall(u64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl From<RunError> for SpectralError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Source(e) => e.into(),
            RunError::Ledger(e) => e.into(),
        }
    }
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// `K_n(t) = |Σ_ℓ N_n(ℓ) e^{2πi⟨ℓ,t⟩}|²`.
pub fn kernel_eval(ledger: &LocalTimeLedger, t: &[f64]) -> Result<f64, SpectralError> {
    if t.len() != ledger.dim() {
        return Err(SpectralError::Dimension {
            expected: ledger.dim(),
            got: t.len(),
        });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (site, &c) in ledger.counts() {
        let phase: f64 = frac(
            site.coords()
                .iter()
                .zip(t)
                .map(|(&l, &ti)| frac(l as f64 * ti))
                .sum(),
        );
        sum += c as f64 * Complex64::from_polar(1.0, std::f64::consts::TAU * phase);
    }
    Ok(sum.norm_sqr())
}

/// `K_n` at the lattice point `t = k g / q`, with the phase reduced exactly.
pub fn kernel_eval_rank1(ledger: &LocalTimeLedger, g: &[i128], q: i128, k: i128) -> f64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for (site, &c) in ledger.counts() {
        let dot: i128 = site
            .coords()
            .iter()
            .zip(g)
            .map(|(&l, &gi)| (l as i128).rem_euclid(q) * gi % q)
            .sum();
        let r = (dot % q * (k % q)).rem_euclid(q);
        sum += c as f64 * Complex64::from_polar(1.0, std::f64::consts::TAU * r as f64 / q as f64);
    }
    sum.norm_sqr()
}

#[derive(Debug, Clone, Serialize)]
pub struct ParsevalCheck {
    pub modulus: u64,
    pub points: u64,
    pub kernel_mean: f64,
    pub self_intersections: u128,
    pub relative_error: f64,
}

/// Averages `K_n` over the rank-1 lattice with generator `(1, Q, Q², …)` and
/// `q = Q^d` points, `Q` one more than the site diameter. Sites then differ
/// by no nonzero vector orthogonal to the generator modulo `q`, so the mean
/// is exactly `V_n`.
pub fn parseval_check(ledger: &LocalTimeLedger) -> Result<ParsevalCheck, SpectralError> {
    let d = ledger.dim();
    let mut lo = [i64::MAX; MAX_DIM];
    let mut hi = [i64::MIN; MAX_DIM];
    for (s, _) in ledger.counts() {
        for (i, &c) in s.coords().iter().enumerate() {
            lo[i] = lo[i].min(c);
            hi[i] = hi[i].max(c);
        }
    }
    let diameter = (0..d)
        .map(|i| (hi[i] as i128 - lo[i] as i128).max(0) as u64)
        .max()
        .unwrap_or(0);
    let base = diameter as i128 + 1;
    let q = base
        .checked_pow(d as u32)
        .filter(|&q| q <= 1 << 24)
        .ok_or(SpectralError::ModulusTooSmall(diameter))?;
    let g: Vec<i128> = (0..d as u32).map(|i| base.pow(i)).collect();
    let total: f64 = (0..q)
        .into_par_iter()
        .map(|k| kernel_eval_rank1(ledger, &g, q, k))
        .sum();
    let mean = total / q as f64;
    let v = ledger.self_intersections();
    Ok(ParsevalCheck {
        modulus: base as u64,
        points: q as u64,
        kernel_mean: mean,
        self_intersections: v,
        relative_error: (mean - v as f64).abs() / v as f64,
    })
}

/// `Σ_r N(r + lag) N(r)`.
pub fn pair_count(ledger: &LocalTimeLedger, lag: &LatticeSite) -> Result<u128, LedgerError> {
    lag.ensure_dim(ledger.dim())?;
    if lag.is_origin() {
        return Ok(ledger.self_intersections());
    }
    let mut total = 0u128;
    for (r, &c) in ledger.counts() {
        let shifted = r.checked_add(lag)?;
        total += c as u128 * ledger.count(&shifted) as u128;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadraticForm {
    pub value: f64,
    /// `V_n Σ_ℓ |r(ℓ)|`.
    pub bound: f64,
}

/// `E‖Σ_k (X_{z_k} - EX)‖² = Σ_ℓ r(ℓ) Σ_r N(r+ℓ) N(r)` for the stationary field.
pub fn quadratic_form(
    ledger: &LocalTimeLedger,
    field: &FieldSpec,
) -> Result<QuadraticForm, SpectralError> {
    field.validate()?;
    let mut value = 0.0;
    let mut abs_sum = 0.0;
    for lag in field.covariance_support(ledger.dim()) {
        let r = field.covariance(&lag);
        if r == 0.0 {
            continue;
        }
        value += r * pair_count(ledger, &lag)? as f64;
        abs_sum += r.abs();
    }
    Ok(QuadraticForm {
        value,
        bound: ledger.self_intersections() as f64 * abs_sum,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsiPhi {
    #[serde(skip)]
    pub psi: Complex64,
    pub psi_re: f64,
    pub psi_im: f64,
    pub phi: f64,
    pub phi_lambda: Option<f64>,
}

/// `Ψ(t) = E e^{2πi⟨ζ,t⟩}` and `1 - Ψ(t)`, the latter without cancellation.
fn psi_and_gap(dist: &StepDistribution, t: &[f64]) -> (Complex64, Complex64) {
    let mut psi = Complex64::new(0.0, 0.0);
    let mut gap = Complex64::new(0.0, 0.0);
    for (a, p) in dist.atoms() {
        let x = frac(
            a.coords()
                .iter()
                .zip(t)
                .map(|(&l, &ti)| frac(l as f64 * ti))
                .sum(),
        );
        let theta = std::f64::consts::TAU * x;
        let (s, c) = theta.sin_cos();
        psi += p * Complex64::new(c, s);
        let h = (0.5 * theta).sin();
        gap += p * Complex64::new(2.0 * h * h, -s);
    }
    (psi, gap)
}

/// `Ψ`, `Φ = (1 - |Ψ|²)/|1 - Ψ|²` (zero at the origin) and, when `lambda` is
/// given, `Φ_λ = (1 - λ²|Ψ|²)/|1 - λΨ|²`.
pub fn psi_phi(
    dist: &StepDistribution,
    t: &[f64],
    lambda: Option<f64>,
) -> Result<PsiPhi, SpectralError> {
    if t.len() != dist.dim() {
        return Err(SpectralError::Dimension {
            expected: dist.dim(),
            got: t.len(),
        });
    }
    let (psi, gap) = psi_and_gap(dist, t);
    let at_origin = t.iter().all(|&x| frac(x) == 0.0);
    let gap2 = gap.norm_sqr();
    let phi = if at_origin {
        0.0
    } else if gap2 < 1e-28 {
        return Err(SpectralError::NotAperiodic(t.to_vec()));
    } else {
        // 1 - |Ψ|² = 2 Re(1 - Ψ) - |1 - Ψ|²
        (2.0 * gap.re - gap2) / gap2
    };
    let phi_lambda = match lambda {
        None => None,
        Some(l) if !(0.0..1.0).contains(&l) => return Err(SpectralError::BadLambda(l)),
        Some(l) => {
            let num = 1.0 - l * l * psi.norm_sqr();
            let den = (Complex64::new(1.0, 0.0) - l * psi).norm_sqr();
            Some(num / den)
        }
    };
    Ok(PsiPhi {
        psi,
        psi_re: psi.re,
        psi_im: psi.im,
        phi,
        phi_lambda,
    })
}

/// Default cap on the convolution buffers.
pub const DEFAULT_MEMORY_BUDGET: u128 = 1 << 29;
/// Width of the two blocks used for the tail fit.
pub const TAIL_BLOCK: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct LagSeries {
    pub lag: LatticeSite,
    /// `P(Z_k = lag)` for `k = 0, …, kmax`.
    pub terms: Vec<f64>,
    pub partial_sum: f64,
    /// Estimated `Σ_{k > kmax} P(Z_k = lag)`.
    pub tail: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReturnSeries {
    pub kmax: usize,
    pub series: Vec<LagSeries>,
}

impl ReturnSeries {
    pub fn get(&self, lag: &LatticeSite) -> Option<&LagSeries> {
        self.series.iter().find(|s| &s.lag == lag)
    }

    /// `I_K(ℓ) = -1_{ℓ=0} + Σ_{k≤K} [P(Z_k = ℓ) + P(Z_k = -ℓ)]` and its tail.
    pub fn i_series(&self, lag: &LatticeSite) -> Option<(f64, f64)> {
        let plus = self.get(lag)?;
        let minus = self.get(&lag.checked_neg().ok()?)?;
        let base = if lag.is_origin() { -1.0 } else { 0.0 };
        Some((
            base + plus.partial_sum + minus.partial_sum,
            plus.tail + minus.tail,
        ))
    }
}

/// Power-law extrapolation `p_k ≈ c k^{-a}` from the last two blocks of
/// [`TAIL_BLOCK`] terms; infinite when the fitted `a ≤ 1`.
pub fn tail_estimate(terms: &[f64]) -> f64 {
    let kmax = terms.len() - 1;
    if kmax < 2 * TAIL_BLOCK + 1 {
        return f64::NAN;
    }
    let b2: f64 = terms[kmax + 1 - TAIL_BLOCK..].iter().sum();
    let b1: f64 = terms[kmax + 1 - 2 * TAIL_BLOCK..kmax + 1 - TAIL_BLOCK]
        .iter()
        .sum();
    if b2 == 0.0 {
        return 0.0;
    }
    if b1 == 0.0 || b2 >= b1 {
        return f64::INFINITY;
    }
    let w = TAIL_BLOCK as f64;
    let m2 = kmax as f64 - (w - 1.0) / 2.0;
    let m1 = m2 - w;
    let a = (b1 / b2).ln() / (m2 / m1).ln();
    if a <= 1.0 {
        return f64::INFINITY;
    }
    let c = b2 / w * m2.powf(a);
    c * (kmax as f64 + 0.5).powf(1.0 - a) / (a - 1.0)
}

/// Exact `P(Z_k = ℓ)` for `k ≤ kmax` and each `ℓ ∈ ±lags`, by dense
/// convolution on a box. At step `k` only cells within
/// `min(kρ, (kmax - k)ρ + L)` are kept, which is exact for the requested
/// lags and halves the box.
pub fn return_series(
    dist: &StepDistribution,
    kmax: usize,
    lags: &[LatticeSite],
    memory_budget: u128,
) -> Result<ReturnSeries, SpectralError> {
    let d = dist.dim();
    let rho = dist.radius() as usize;
    let mut all_lags: Vec<LatticeSite> = Vec::new();
    for l in lags {
        l.ensure_dim(d).map_err(SourceError::from)?;
        for x in [*l, l.checked_neg().map_err(SourceError::from)?] {
            if !all_lags.contains(&x) {
                all_lags.push(x);
            }
        }
    }
    let lag_radius = all_lags
        .iter()
        .map(|l| l.sup_norm() as usize)
        .max()
        .unwrap_or(0);
    let radius_at = |k: usize| (k * rho).min((kmax - k) * rho + lag_radius);
    let max_r = (0..=kmax).map(radius_at).max().unwrap_or(0);
    let half = max_r + rho.max(lag_radius);
    let side = 2 * half + 1;
    let cells = (side as u128).pow(d as u32);
    let needed = cells * 16;
    if needed > memory_budget {
        return Err(SpectralError::MemoryBudget {
            needed,
            budget: memory_budget,
        });
    }
    let cells = cells as usize;
    let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
    let center: usize = strides.iter().map(|s| s * half).sum();
    let flat = |coords: &[i64]| -> isize {
        coords
            .iter()
            .zip(&strides)
            .map(|(&c, &s)| c as isize * s as isize)
            .sum::<isize>()
    };
    let offsets: Vec<(isize, f64)> = dist
        .atoms()
        .iter()
        .map(|(a, p)| (flat(a.coords()), *p))
        .collect();
    let lag_cells: Vec<usize> = all_lags
        .iter()
        .map(|l| (center as isize + flat(l.coords())) as usize)
        .collect();

    let mut cur = vec![0.0f64; cells];
    let mut next = vec![0.0f64; cells];
    cur[center] = 1.0;
    let mut terms: Vec<Vec<f64>> = lag_cells.iter().map(|&c| vec![cur[c]]).collect();
    let mut prev_r = 0usize;
    let mut prev_prev_r = 0usize;
    for k in 1..=kmax {
        let r = radius_at(k);
        for_box(d, side, half, prev_prev_r, |idx| next[idx] = 0.0);
        for_box(d, side, half, r, |idx| {
            let mut acc = 0.0;
            for &(off, p) in &offsets {
                acc += p * cur[(idx as isize - off) as usize];
            }
            next[idx] = acc;
        });
        std::mem::swap(&mut cur, &mut next);
        for (t, &c) in terms.iter_mut().zip(&lag_cells) {
            t.push(cur[c]);
        }
        prev_prev_r = prev_r;
        prev_r = r;
    }
    let series = all_lags
        .into_iter()
        .zip(terms)
        .map(|(lag, terms)| {
            let partial_sum = terms.iter().sum();
            let tail = tail_estimate(&terms);
            LagSeries {
                lag,
                terms,
                partial_sum,
                tail,
            }
        })
        .collect();
    Ok(ReturnSeries { kmax, series })
}

/// Visits every flat index of the centered sup-norm box of radius `r`
/// inside a dense cube of side `side`.
fn for_box(d: usize, side: usize, half: usize, r: usize, mut f: impl FnMut(usize)) {
    let lo = half - r;
    let hi = half + r;
    let mut idx = [lo; MAX_DIM];
    let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
    loop {
        let base: usize = (1..d).map(|i| idx[i] * strides[i]).sum();
        for x in lo..=hi {
            f(base + x);
        }
        let mut axis = 1;
        loop {
            if axis >= d {
                return;
            }
            if idx[axis] < hi {
                idx[axis] += 1;
                break;
            }
            idx[axis] = lo;
            axis += 1;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub n: u64,
    pub replicates: usize,
    pub kmax: usize,
    /// Mean of `quadratic_form / n` over independent walks.
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    /// `Σ_ℓ r(ℓ) I_K(ℓ)` with the truncated series.
    pub series_prediction: f64,
    /// `Σ_ℓ r(ℓ)` times the tail estimate of `I(ℓ)` beyond `kmax`.
    pub tail_bound: f64,
    /// `series_prediction + tail_bound`; informational.
    pub extrapolated_prediction: f64,
    /// `mc_estimate - series_prediction`.
    pub defect_estimate: f64,
    /// Heuristic tolerance `0.05 · series_prediction` for the defect.
    pub defect_threshold: f64,
    /// Only asserted for `d ≥ 2`.
    pub defect_small: Option<bool>,
    /// `|mc_estimate - series_prediction| / series_prediction`.
    pub relative_error: f64,
    /// Same against `extrapolated_prediction`.
    pub extrapolated_relative_error: f64,
    pub positive: bool,
}

pub const DEFECT_FRACTION: f64 = 0.05;

pub fn transient_variance_report(
    dist: &StepDistribution,
    field: &FieldSpec,
    n: u64,
    replicates: usize,
    seed_base: u64,
    kmax: usize,
) -> Result<VarianceReport, SpectralError> {
    let class = dist.classify();
    if class.recurrence != Recurrence::Transient {
        return Err(SpectralError::NotTransient(class.recurrence));
    }
    if replicates < 2 {
        return Err(SpectralError::TooFewReplicates);
    }
    field.validate()?;
    let d = dist.dim();
    let lags: Vec<LatticeSite> = field
        .covariance_support(d)
        .into_iter()
        .filter(|l| field.covariance(l) != 0.0)
        .collect();
    let rs = return_series(dist, kmax, &lags, DEFAULT_MEMORY_BUDGET)?;
    let mut series_prediction = 0.0;
    let mut tail_bound = 0.0;
    for l in &lags {
        let (i, tail) = rs.i_series(l).expect("lag present");
        let r = field.covariance(l);
        series_prediction += r * i;
        tail_bound += r * tail;
    }

    let samples: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<f64, SpectralError> {
            let mut walk = RandomWalk::new(dist.clone(), sequence_seed(seed_base, r as u64));
            let (ledger, _) = fill_ledger(&mut walk, n, &[])?;
            Ok(quadratic_form(&ledger, field)?.value / n as f64)
        })
        .collect::<Result<_, _>>()?;
    let rf = replicates as f64;
    let mc_estimate = samples.iter().sum::<f64>() / rf;
    let var = samples
        .iter()
        .map(|x| (x - mc_estimate).powi(2))
        .sum::<f64>()
        / (rf - 1.0);
    let mc_stderr = (var / rf).sqrt();
    let extrapolated_prediction = series_prediction + tail_bound;
    let defect_estimate = mc_estimate - series_prediction;
    let defect_threshold = DEFECT_FRACTION * series_prediction;
    Ok(VarianceReport {
        n,
        replicates,
        kmax,
        mc_estimate,
        mc_stderr,
        series_prediction,
        tail_bound,
        extrapolated_prediction,
        defect_estimate,
        defect_threshold,
        defect_small: (d >= 2).then_some(defect_estimate.abs() <= defect_threshold),
        relative_error: defect_estimate.abs() / series_prediction,
        extrapolated_relative_error: (mc_estimate - extrapolated_prediction).abs()
            / extrapolated_prediction,
        positive: mc_estimate > 0.0 && series_prediction > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Innovation;

    fn line(xs: impl IntoIterator<Item = i64>) -> LocalTimeLedger {
        let mut l = LocalTimeLedger::new(1).unwrap();
        l.extend(xs.into_iter().map(LatticeSite::scalar)).unwrap();
        l
    }

    #[test]
    fn kernel_at_origin_is_n_squared() {
        let l = line([0, 3, 3, -2, 7]);
        assert!((kernel_eval(&l, &[0.0]).unwrap() - 25.0).abs() < 1e-9);
    }

    #[test]
    fn alternating_sum_at_half() {
        for n in 1..20 {
            let k = kernel_eval(&line(0..n), &[0.5]).unwrap();
            let want = if n % 2 == 0 { 0.0 } else { 1.0 };
            assert!((k - want).abs() < 1e-9, "n={n} k={k}");
        }
    }

    #[test]
    fn parseval_small() {
        let l = line([0, 1, 0, 1, 5, -3]);
        let p = parseval_check(&l).unwrap();
        assert_eq!(p.points, 9);
        assert!(p.relative_error < 1e-12);
    }

    #[test]
    fn quadratic_forms() {
        let l = line([0, 1, 0, 4, 0]);
        let iid = quadratic_form(&l, &FieldSpec::IidUniform01).unwrap();
        assert_eq!(iid.value, (1.0 / 12.0) * l.self_intersections() as f64);
        let ma = FieldSpec::MovingAverage {
            weights: vec![1.0, 1.0],
            innovation: Innovation::Gaussian { sigma: 1.0 },
        };
        for n in 1..30 {
            let q = quadratic_form(&line(0..n), &ma).unwrap();
            assert_eq!(q.value, (4 * n - 2) as f64);
            assert!(q.value <= q.bound);
        }
    }

    #[test]
    fn phi_of_symmetric_walk() {
        let d = StepDistribution::simple_1d();
        for t in [0.01, 0.2, 0.37, 0.5, 0.93] {
            let r = psi_phi(&d, &[t], Some(0.0)).unwrap();
            assert!((r.psi.re - (std::f64::consts::TAU * t).cos()).abs() < 1e-15);
            let cot = 1.0 / (std::f64::consts::PI * t).tan();
            assert!((r.phi - cot * cot).abs() <= 1e-12 * (cot * cot).max(1.0));
            assert_eq!(r.phi_lambda, Some(1.0));
        }
        assert_eq!(psi_phi(&d, &[0.0], None).unwrap().phi, 0.0);
        assert!(psi_phi(&d, &[0.3], Some(1.0)).is_err());
    }

    #[test]
    fn periodic_law_rejected() {
        let d = StepDistribution::new(vec![
            (LatticeSite::scalar(2), 0.5),
            (LatticeSite::scalar(-2), 0.5),
        ])
        .unwrap();
        assert!(matches!(
            psi_phi(&d, &[0.5], None),
            Err(SpectralError::NotAperiodic(_))
        ));
    }

    #[test]
    fn one_dimensional_returns() {
        let d = StepDistribution::simple_1d();
        let rs = return_series(&d, 6, &[LatticeSite::scalar(0)], DEFAULT_MEMORY_BUDGET).unwrap();
        let t = &rs.get(&LatticeSite::scalar(0)).unwrap().terms;
        assert_eq!(t[..5], [1.0, 0.0, 0.5, 0.0, 0.375]);
        assert!((t[6] - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn drift_never_returns() {
        let d = StepDistribution::new(vec![
            (LatticeSite::scalar(1), 0.6),
            (LatticeSite::scalar(2), 0.4),
        ])
        .unwrap();
        let rs = return_series(&d, 40, &[LatticeSite::scalar(0)], DEFAULT_MEMORY_BUDGET).unwrap();
        let s = rs.get(&LatticeSite::scalar(0)).unwrap();
        assert_eq!(s.partial_sum, 1.0);
        assert_eq!(s.tail, 0.0);
    }

    #[test]
    fn truncated_box_matches_full_box() {
        // A lopsided 2-d law; compare against naive convolution on a large grid.
        let law = StepDistribution::new(vec![
            (LatticeSite::new(&[1, 0]).unwrap(), 0.3),
            (LatticeSite::new(&[-1, 1]).unwrap(), 0.3),
            (LatticeSite::new(&[0, -1]).unwrap(), 0.4),
        ])
        .unwrap();
        let k = 12;
        let lag = LatticeSite::new(&[1, -1]).unwrap();
        let rs = return_series(
            &law,
            k,
            &[LatticeSite::origin(2).unwrap(), lag],
            DEFAULT_MEMORY_BUDGET,
        )
        .unwrap();
        let mut p = std::collections::HashMap::from([((0i64, 0i64), 1.0f64)]);
        let mut naive = vec![(p[&(0, 0)], 0.0)];
        for _ in 1..=k {
            let mut q = std::collections::HashMap::new();
            for (&(x, y), &m) in &p {
                for (a, w) in law.atoms() {
                    *q.entry((x + a.coords()[0], y + a.coords()[1]))
                        .or_insert(0.0) += m * w;
                }
            }
            p = q;
            naive.push((
                p.get(&(0, 0)).copied().unwrap_or(0.0),
                p.get(&(-1, 1)).copied().unwrap_or(0.0),
            ));
        }
        let origin = &rs.get(&LatticeSite::origin(2).unwrap()).unwrap().terms;
        let neg = &rs.get(&LatticeSite::new(&[-1, 1]).unwrap()).unwrap().terms;
        for j in 0..=k {
            assert!((origin[j] - naive[j].0).abs() < 1e-15);
            assert!((neg[j] - naive[j].1).abs() < 1e-15);
        }
    }

    #[test]
    fn memory_budget_enforced() {
        let d = StepDistribution::simple(3);
        assert!(matches!(
            return_series(&d, 200, &[LatticeSite::origin(3).unwrap()], 1 << 20),
            Err(SpectralError::MemoryBudget { .. })
        ));
    }

    #[test]
    fn tail_of_exact_power_law() {
        let terms: Vec<f64> = (0..=200)
            .map(|k| if k == 0 { 1.0 } else { (k as f64).powf(-1.5) })
            .collect();
        let est = tail_estimate(&terms);
        let truth: f64 =
            (201..2_000_000).map(|k| (k as f64).powf(-1.5)).sum::<f64>() + 2.0 / (2e6f64).sqrt();
        assert!((est / truth - 1.0).abs() < 0.01, "{est} vs {truth}");
    }

    #[test]
    fn recurrent_law_rejected() {
        let e = transient_variance_report(
            &StepDistribution::simple(2),
            &FieldSpec::IidUniform01,
            100,
            5,
            0,
            50,
        );
        assert!(matches!(
            e,
            Err(SpectralError::NotTransient(Recurrence::Recurrent))
        ));
    }
}
