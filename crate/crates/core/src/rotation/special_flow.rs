//! Discrete special flow over a rotation with a roof of growing spikes,
//! sampled through the cocycle of the basis indicator.
//!
//! The roof is `φ = 1 + Σ_{n≤L} ⌊q_{λ_n}/n²⌋ 1_{J_n}` on the intervals
//! `J_n = [3/q_{λ_{n+1}}, 3/q_{λ_n})`, where `q_k` are the convergent
//! denominators of `α`. The orbit of `(x, 0)` climbs each tower and the
//! sampled value increases by one exactly at basis visits, so the site
//! `j + 1` ends up with local time `φ(x + jα)`.

use serde::Serialize;

use super::angle::Angle;
use super::cf::ContinuedFraction;
use super::RotationError;
use crate::ledger::LocalTimeLedger;
use crate::site::LatticeSite;
use crate::sources::{SiteSource, SourceError};

#[derive(Debug, Clone)]
pub struct SpecialFlowConfig {
    pub cf: ContinuedFraction,
    /// `λ_1 < … < λ_{L+1}`; the last index only bounds `J_L` from below.
    pub lambda_indices: Vec<usize>,
    pub start: Angle,
}

/// Validated spike geometry.
#[derive(Debug, Clone, Serialize)]
pub struct SpikeLevel {
    pub level: usize,
    pub lambda: usize,
    pub q_lambda: u128,
    /// `⌊q_{λ_n} / n²⌋`.
    pub roof_term: u128,
    #[serde(skip)]
    lower: Angle,
    /// `None` when the upper end is 1.
    #[serde(skip)]
    upper: Option<Angle>,
}

impl SpecialFlowConfig {
    /// Greedy smallest indices with `q_{λ_1} ≥ 3` and, for `n ≥ 2`,
    /// `q_{λ_n} > 3 q_{λ_{n-1}}` and `q_{λ_n} ≥ n q_{λ_{n-1}}²`.
    pub fn minimal(
        cf: ContinuedFraction,
        levels: usize,
        start: Angle,
    ) -> Result<Self, RotationError> {
        let depth = cf.max_depth();
        let qs: Vec<u128> = cf.denominators(depth)?;
        let mut idx = Vec::with_capacity(levels + 1);
        let mut k = 0usize;
        for n in 1..=levels + 1 {
            let found = loop {
                if k >= qs.len() {
                    return Err(RotationError::Config(format!(
                        "no convergent large enough for level {n}"
                    )));
                }
                let q = qs[k];
                let ok = match idx.last() {
                    None => q >= 3,
                    Some(&prev) => {
                        let qp: u128 = qs[prev - 1];
                        q > 3 * qp
                            && qp
                                .checked_mul(qp)
                                .and_then(|s| s.checked_mul(n as u128))
                                .is_some_and(|b| q >= b)
                    }
                };
                k += 1;
                if ok {
                    break k;
                }
            };
            idx.push(found);
        }
        Ok(Self {
            cf,
            lambda_indices: idx,
            start,
        })
    }

    /// Roof identically one.
    pub fn flat(cf: ContinuedFraction, start: Angle) -> Self {
        Self {
            cf,
            lambda_indices: Vec::new(),
            start,
        }
    }

    pub fn level_count(&self) -> usize {
        self.lambda_indices.len().saturating_sub(1)
    }

    /// Checks the growth conditions and builds the spike table.
    pub fn validate(&self) -> Result<Vec<SpikeLevel>, RotationError> {
        let idx = &self.lambda_indices;
        if idx.is_empty() {
            return Ok(Vec::new());
        }
        if idx.len() == 1 {
            return Err(RotationError::Invariant(
                "need λ_{L+1} to bound the last interval".into(),
            ));
        }
        let max = *idx.iter().max().expect("nonempty");
        let qs = self.cf.denominators(max)?;
        let q = |i: usize| qs[idx[i] - 1];
        if idx.windows(2).any(|w| w[0] >= w[1]) || idx[0] == 0 {
            return Err(RotationError::Invariant(
                "λ indices must be positive and increasing".into(),
            ));
        }
        if q(0) < 3 {
            return Err(RotationError::Invariant(format!(
                "3/q_λ1 = 3/{} exceeds 1",
                q(0)
            )));
        }
        for i in 1..idx.len() {
            let n = i + 1;
            let (qp, qn) = (q(i - 1), q(i));
            if qn < 3 * qp {
                return Err(RotationError::Invariant(format!(
                    "q_λ{n} = {qn} < 3 q_λ{} = {}",
                    n - 1,
                    3 * qp
                )));
            }
            if qn == 3 * qp {
                return Err(RotationError::Invariant(format!(
                    "J_{} has length exactly 2/q_λ{}",
                    n - 1,
                    n - 1
                )));
            }
            let need = qp.checked_mul(qp).and_then(|s| s.checked_mul(n as u128));
            if need.is_none_or(|need| qn < need) {
                return Err(RotationError::Invariant(format!(
                    "q_λ{n} = {qn} < {n} (q_λ{})^2",
                    n - 1
                )));
            }
        }
        let mut levels = Vec::with_capacity(idx.len() - 1);
        for i in 0..idx.len() - 1 {
            let n = i + 1;
            let (qn, qnext) = (q(i), q(i + 1));
            let lower = Angle::from_fraction(3, qnext).expect("q_next > 3");
            let upper = if qn == 3 {
                None
            } else {
                Some(Angle::from_fraction(3, qn).expect("q > 3"))
            };
            levels.push(SpikeLevel {
                level: n,
                lambda: idx[i],
                q_lambda: qn,
                roof_term: qn / (n as u128 * n as u128),
                lower,
                upper,
            });
        }
        Ok(levels)
    }
}

/// Stream of the sampled sequence along the special-flow orbit of `(x, 0)`.
#[derive(Debug, Clone)]
pub struct SpecialFlow {
    alpha: Angle,
    levels: Vec<SpikeLevel>,
    base_point: Angle,
    base_index: u64,
    /// Level of the spike at the current base point, if any.
    base_level: Option<usize>,
    height: u128,
    roof: u128,
    z: i64,
    steps: u64,
    budget: Option<u64>,
    first_visits: Vec<Option<u64>>,
    /// Running `Σ_{k<j} φ(S^k x)` over completed towers.
    return_time: u128,
    completed: Option<u64>,
    completed_level: Option<usize>,
}

impl SpecialFlow {
    pub fn new(config: &SpecialFlowConfig, budget: Option<u64>) -> Result<Self, RotationError> {
        let levels = config.validate()?;
        let (p, q) = config.cf.deep_convergent();
        let alpha = Angle::from_fraction(p % q, q)
            .ok_or_else(|| RotationError::Config("bad rotation number".into()))?;
        let first_visits = vec![None; levels.len()];
        let mut flow = Self {
            alpha,
            levels,
            base_point: config.start,
            base_index: 0,
            base_level: None,
            height: 0,
            roof: 1,
            z: 0,
            steps: 0,
            budget,
            first_visits,
            return_time: 0,
            completed: None,
            completed_level: None,
        };
        flow.enter_base();
        Ok(flow)
    }

    pub fn levels(&self) -> &[SpikeLevel] {
        &self.levels
    }

    /// Roof `φ(y)` and the spike level containing `y`.
    pub fn roof_at(&self, y: Angle) -> (u128, Option<usize>) {
        for (i, l) in self.levels.iter().enumerate() {
            if y >= l.lower && l.upper.is_none_or(|u| y < u) {
                return (1 + l.roof_term, Some(i));
            }
        }
        (1, None)
    }

    fn enter_base(&mut self) {
        let (roof, level) = self.roof_at(self.base_point);
        self.roof = roof;
        self.base_level = level;
        if let Some(i) = level {
            if self.first_visits[i].is_none() {
                self.first_visits[i] = Some(self.base_index);
            }
        }
    }

    /// First index `j` with `S^j x ∈ J_n`, once reached.
    pub fn first_visit(&self, level: usize) -> Option<u64> {
        self.first_visits.get(level - 1).copied().flatten()
    }

    /// `R_j(x) = Σ_{k<j} φ(S^k x)` for the current base index `j`.
    pub fn return_time(&self) -> u128 {
        self.return_time
    }

    pub fn base_index(&self) -> u64 {
        self.base_index
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// If the last step finished a tower, its base index and spike level.
    pub fn last_completed(&self) -> Option<(u64, Option<usize>)> {
        self.completed.map(|j| (j, self.completed_level))
    }

    pub fn next_value(&mut self) -> Result<i64, RotationError> {
        if let Some(b) = self.budget {
            if self.steps >= b {
                return Err(RotationError::BudgetExhausted(b));
            }
        }
        if self.height == 0 {
            self.z = self.z.checked_add(1).ok_or(RotationError::Overflow)?;
        }
        self.steps += 1;
        self.height += 1;
        self.completed = None;
        if self.height == self.roof {
            self.completed = Some(self.base_index);
            self.completed_level = self.base_level;
            self.return_time += self.roof;
            self.height = 0;
            self.base_point = self.base_point.wrapping_add(self.alpha);
            self.base_index += 1;
            self.enter_base();
        }
        Ok(self.z)
    }
}

impl SiteSource for SpecialFlow {
    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn next_site(&mut self) -> Result<LatticeSite, SourceError> {
        Ok(LatticeSite::scalar(self.next_value()?))
    }
}

/// Ledger statistics at the end of the first tower over `J_n`.
#[derive(Debug, Clone, Serialize)]
pub struct ScheduleRow {
    pub level: usize,
    pub q_lambda: u128,
    /// `W_n(x)`, the first `j` with `x + jα ∈ J_n`.
    pub first_visit: u64,
    /// Sequence length at the checkpoint, `Σ_{j≤W_n} φ(S^j x)`.
    pub time: u64,
    pub max_count: u64,
    pub self_intersections: u128,
    pub m2_over_v: f64,
    /// `1 + ⌊q_{λ_n}/n²⌋`.
    pub expected_max: u128,
    pub max_matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioSchedule {
    /// Rows ordered by level.
    pub rows: Vec<ScheduleRow>,
    pub levels_requested: usize,
    pub steps_used: u64,
    pub budget_exhausted: bool,
    /// `M²/V` strictly increasing from one reported level to the next.
    pub ratios_increasing: bool,
    pub all_max_match: bool,
}

/// Runs the flow under a step budget, recording `(n, time, M, V, M²/V)` at
/// each level checkpoint. Fails if fewer than two levels fit in the budget
/// (one when the configuration has a single level).
pub fn counterexample_ratio_schedule(
    config: &SpecialFlowConfig,
    budget: u64,
) -> Result<RatioSchedule, RotationError> {
    let mut flow = SpecialFlow::new(config, Some(budget))?;
    let levels = flow.levels().to_vec();
    let mut ledger = LocalTimeLedger::new(1).expect("dimension 1");
    let mut rows: Vec<ScheduleRow> = Vec::with_capacity(levels.len());
    let mut budget_exhausted = false;
    while rows.len() < levels.len() {
        let z = match flow.next_value() {
            Ok(z) => z,
            Err(RotationError::BudgetExhausted(_)) => {
                budget_exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        };
        ledger
            .record(LatticeSite::scalar(z))
            .map_err(|e| RotationError::Config(e.to_string()))?;
        if let Some((j, Some(i))) = flow.last_completed() {
            if flow.first_visit(i + 1) == Some(j) {
                let l = &levels[i];
                let expected_max = 1 + l.roof_term;
                rows.push(ScheduleRow {
                    level: l.level,
                    q_lambda: l.q_lambda,
                    first_visit: j,
                    time: ledger.n(),
                    max_count: ledger.max_count(),
                    self_intersections: ledger.self_intersections(),
                    m2_over_v: ledger.m2_over_v(),
                    expected_max,
                    max_matches: ledger.max_count() as u128 == expected_max,
                });
            }
        }
    }
    let needed = levels.len().min(2);
    if rows.len() < needed {
        return Err(RotationError::BudgetExhausted(budget));
    }
    rows.sort_by_key(|r| r.level);
    let ratios_increasing = rows.windows(2).all(|w| w[1].m2_over_v > w[0].m2_over_v);
    let all_max_match = rows.iter().all(|r| r.max_matches);
    Ok(RatioSchedule {
        rows,
        levels_requested: levels.len(),
        steps_used: flow.steps(),
        budget_exhausted,
        ratios_increasing,
        all_max_match,
    })
}
