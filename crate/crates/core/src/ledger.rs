//! Streaming local-time statistics of a lattice sequence.
//!
//! For a prefix `z_0, …, z_{n-1}` the ledger keeps the occupation counts
//! `N_n(ℓ)`, the maximal local time `M_n = max_ℓ N_n(ℓ)`, the number of
//! self-intersections `V_n = Σ_ℓ N_n(ℓ)^2 = #{(j,k) : z_j = z_k}`, the range
//! cardinality, and the partial sum `Σ_{k≤n} M_k / k^2`.

use std::collections::HashMap;

use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::site::{LatticeSite, SiteError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error(transparent)]
    Site(#[from] SiteError),
    #[error("self-intersection count overflowed at n = {0}")]
    Overflow(u64),
    #[error("empty input")]
    Empty,
    #[error("empty subset")]
    EmptySubset,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone)]
pub struct LocalTimeLedger {
    dim: usize,
    n: u64,
    counts: FxHashMap<LatticeSite, u64>,
    max_count: u64,
    self_intersections: u128,
    range: u64,
    pqd: CompensatedSum,
}

/// One row of the checkpoint table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Snapshot {
    pub n: u64,
    #[serde(rename = "M")]
    pub max_count: u64,
    #[serde(rename = "V")]
    pub self_intersections: u128,
    pub range: u64,
    pub m2_over_v: f64,
    pub pqd_partial_sum: f64,
}

impl Snapshot {
    pub const CSV_HEADER: [&'static str; 6] =
        ["n", "M", "V", "range", "m2_over_v", "pqd_partial_sum"];

    pub fn csv_record(&self) -> [String; 6] {
        [
            self.n.to_string(),
            self.max_count.to_string(),
            self.self_intersections.to_string(),
            self.range.to_string(),
            format!("{:.12e}", self.m2_over_v),
            format!("{:.12e}", self.pqd_partial_sum),
        ]
    }
}

impl LocalTimeLedger {
    pub fn new(dim: usize) -> Result<Self, LedgerError> {
        LatticeSite::origin(dim)?;
        Ok(Self {
            dim,
            n: 0,
            counts: FxHashMap::default(),
            max_count: 0,
            self_intersections: 0,
            range: 0,
            pqd: CompensatedSum::default(),
        })
    }

    /// Records the next site of the sequence.
    pub fn record(&mut self, site: LatticeSite) -> Result<(), LedgerError> {
        site.ensure_dim(self.dim)?;
        let n_next = self.n + 1;
        let slot = self.counts.entry(site).or_insert(0);
        let old = *slot;
        let inc = 2 * (old as u128) + 1;
        let v = self
            .self_intersections
            .checked_add(inc)
            .ok_or(LedgerError::Overflow(n_next))?;
        *slot = old + 1;
        self.self_intersections = v;
        self.n = n_next;
        if old == 0 {
            self.range += 1;
        }
        if old + 1 > self.max_count {
            self.max_count = old + 1;
        }
        let nf = n_next as f64;
        self.pqd.add(self.max_count as f64 / (nf * nf));
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = LatticeSite>>(
        &mut self,
        sites: I,
    ) -> Result<(), LedgerError> {
        for s in sites {
            self.record(s)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn max_count(&self) -> u64 {
        self.max_count
    }

    pub fn self_intersections(&self) -> u128 {
        self.self_intersections
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn pqd_partial_sum(&self) -> f64 {
        self.pqd.value()
    }

    pub fn count(&self, site: &LatticeSite) -> u64 {
        self.counts.get(site).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = (&LatticeSite, &u64)> {
        self.counts.iter()
    }

    /// Counts sorted by site, for deterministic iteration.
    pub fn sorted_counts(&self) -> Vec<(LatticeSite, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(s, c)| (*s, *c)).collect();
        v.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        v
    }

    pub fn m2_over_v(&self) -> f64 {
        if self.self_intersections == 0 {
            return 0.0;
        }
        let m = self.max_count as f64;
        m * m / self.self_intersections as f64
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            n: self.n,
            max_count: self.max_count,
            self_intersections: self.self_intersections,
            range: self.range,
            m2_over_v: self.m2_over_v(),
            pqd_partial_sum: self.pqd_partial_sum(),
        }
    }

    /// Recomputes every derived statistic from the count map and compares.
    pub fn verify_rescan(&self) -> bool {
        let mut total = 0u64;
        let mut v = 0u128;
        let mut m = 0u64;
        let mut range = 0u64;
        for &c in self.counts.values() {
            total += c;
            v += (c as u128) * (c as u128);
            m = m.max(c);
            if c > 0 {
                range += 1;
            }
        }
        total == self.n
            && v == self.self_intersections
            && m == self.max_count
            && range == self.range
    }

    /// Lower bound `(Σ_{ℓ∈A} N_n(ℓ))^2 / Card(A)` on `V_n` for a finite set `A`.
    ///
    /// Duplicate entries in `subset` are ignored.
    pub fn subset_lower_bound(&self, subset: &[LatticeSite]) -> Result<RationalBound, LedgerError> {
        let mut uniq: Vec<LatticeSite> = subset.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.is_empty() {
            return Err(LedgerError::EmptySubset);
        }
        let mut hits = 0u128;
        for s in &uniq {
            s.ensure_dim(self.dim)?;
            hits += self.count(s) as u128;
        }
        Ok(RationalBound {
            numerator: hits * hits,
            denominator: uniq.len() as u128,
        })
    }

    /// The range bound `V_n ≥ n^2 / Card(R_n)`.
    pub fn range_lower_bound(&self) -> RationalBound {
        let n = self.n as u128;
        RationalBound {
            numerator: n * n,
            denominator: self.range.max(1) as u128,
        }
    }
}

/// An exact nonnegative rational `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RationalBound {
    pub numerator: u128,
    pub denominator: u128,
}

impl RationalBound {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Exact test `self ≤ v`.
    pub fn le_integer(&self, v: u128) -> bool {
        match v.checked_mul(self.denominator) {
            Some(rhs) => self.numerator <= rhs,
            None => true,
        }
    }
}

/// Output of the quadratic brute-force tally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteStats {
    pub self_intersections: u128,
    pub max_count: u64,
    pub counts: HashMap<LatticeSite, u64>,
}

/// `V_n` by the O(n^2) double loop over ordered pairs, `M_n` and counts by direct tally.
pub fn brute_force_stats(sites: &[LatticeSite]) -> Result<BruteStats, LedgerError> {
    let first = sites.first().ok_or(LedgerError::Empty)?;
    let d = first.dim();
    for s in sites {
        s.ensure_dim(d)?;
    }
    let mut v = 0u128;
    for a in sites {
        for b in sites {
            if a == b {
                v += 1;
            }
        }
    }
    let mut counts = HashMap::new();
    for s in sites {
        *counts.entry(*s).or_insert(0u64) += 1;
    }
    let max_count = counts.values().copied().max().unwrap_or(0);
    Ok(BruteStats {
        self_intersections: v,
        max_count,
        counts,
    })
}

/// Chebyshev-type lower bound on `V_n` for a one-dimensional sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionBound {
    pub mean: f64,
    pub sigma: f64,
    /// `max_λ (1 - λ^{-2})^2 n^2 / (2λσ + 1)` over the fixed grid of λ.
    pub bound: f64,
    pub best_lambda: f64,
    /// `n^2 / (9σ)` when `σ > 1`.
    pub one_ninth_bound: Option<f64>,
    /// `(9/80) n^2 / σ` when `σ > 1` (the λ = 2 specialization).
    pub nine_eightieths_bound: Option<f64>,
}

pub const DISPERSION_LAMBDAS: [f64; 4] = [1.5, 2.0, 3.0, 4.0];

pub fn dispersion_bound(sites: &[i64]) -> Result<DispersionBound, LedgerError> {
    if sites.is_empty() {
        return Err(LedgerError::Empty);
    }
    let n = sites.len() as f64;
    let mut mean_acc = CompensatedSum::default();
    for &z in sites {
        mean_acc.add(z as f64);
    }
    let mean = mean_acc.value() / n;
    let mut var_acc = CompensatedSum::default();
    for &z in sites {
        let dz = z as f64 - mean;
        var_acc.add(dz * dz);
    }
    let sigma = (var_acc.value() / n).sqrt();
    let (bound, best_lambda) = DISPERSION_LAMBDAS
        .iter()
        .map(|&l| {
            let a = 1.0 - 1.0 / (l * l);
            (a * a * n * n / (2.0 * l * sigma + 1.0), l)
        })
        .fold((f64::NEG_INFINITY, 0.0), |best, cur| {
            if cur.0 > best.0 {
                cur
            } else {
                best
            }
        });
    let (one_ninth_bound, nine_eightieths_bound) = if sigma > 1.0 {
        (
            Some(n * n / (9.0 * sigma)),
            Some(9.0 * n * n / (80.0 * sigma)),
        )
    } else {
        (None, None)
    };
    Ok(DispersionBound {
        mean,
        sigma,
        bound,
        best_lambda,
        one_ninth_bound,
        nine_eightieths_bound,
    })
}
