//! Continued fractions `[0; a_1, a_2, …]` and their convergents.

use serde::{Deserialize, Serialize};

use super::RotationError;

/// How the partial quotients are given in a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CfSpec {
    /// `pattern` repeated forever, e.g. `[1]` for the golden mean.
    Repeating { pattern: Vec<u64> },
    /// A finite list of partial quotients.
    Explicit { coeffs: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuedFraction {
    coeffs: Vec<u64>,
    repeating: bool,
}

/// Convergents are kept below this so that fixed-point division and the
/// three-term recurrence never overflow.
pub const MAX_DENOMINATOR: u128 = 1 << 126;

impl ContinuedFraction {
    pub fn from_spec(spec: &CfSpec) -> Result<Self, RotationError> {
        match spec {
            CfSpec::Repeating { pattern } => Self::repeating(pattern.clone()),
            CfSpec::Explicit { coeffs } => Self::explicit(coeffs.clone()),
        }
    }

    pub fn repeating(pattern: Vec<u64>) -> Result<Self, RotationError> {
        Self::validated(pattern, true)
    }

    pub fn explicit(coeffs: Vec<u64>) -> Result<Self, RotationError> {
        Self::validated(coeffs, false)
    }

    fn validated(coeffs: Vec<u64>, repeating: bool) -> Result<Self, RotationError> {
        if coeffs.is_empty() {
            return Err(RotationError::Config(
                "continued fraction needs at least one coefficient".into(),
            ));
        }
        if coeffs.contains(&0) {
            return Err(RotationError::Config(
                "partial quotients must be positive".into(),
            ));
        }
        Ok(Self { coeffs, repeating })
    }

    /// `(√5 - 1)/2 = [0; 1, 1, 1, …]`.
    pub fn golden() -> Self {
        Self {
            coeffs: vec![1],
            repeating: true,
        }
    }

    /// `√2 - 1 = [0; 2, 2, 2, …]`.
    pub fn silver() -> Self {
        Self {
            coeffs: vec![2],
            repeating: true,
        }
    }

    pub fn to_spec(&self) -> CfSpec {
        if self.repeating {
            CfSpec::Repeating {
                pattern: self.coeffs.clone(),
            }
        } else {
            CfSpec::Explicit {
                coeffs: self.coeffs.clone(),
            }
        }
    }

    /// Partial quotient `a_k`, 1-based.
    pub fn coeff(&self, k: usize) -> Option<u64> {
        if k == 0 {
            return None;
        }
        if self.repeating {
            Some(self.coeffs[(k - 1) % self.coeffs.len()])
        } else {
            self.coeffs.get(k - 1).copied()
        }
    }

    /// Largest `k` whose convergent stays below [`MAX_DENOMINATOR`].
    pub fn max_depth(&self) -> usize {
        let (mut q2, mut q1) = (0u128, 1u128);
        let mut k = 0;
        while let Some(a) = self.coeff(k + 1) {
            let q = match (a as u128).checked_mul(q1).and_then(|x| x.checked_add(q2)) {
                Some(q) if q < MAX_DENOMINATOR => q,
                _ => break,
            };
            q2 = q1;
            q1 = q;
            k += 1;
        }
        k
    }

    /// Convergents `(p_k, q_k)` for `k = 1..=depth`.
    pub fn convergents(&self, depth: usize) -> Result<Vec<(u128, u128)>, RotationError> {
        let available = self.max_depth();
        if depth > available {
            return Err(RotationError::DepthExceeded {
                requested: depth,
                available,
            });
        }
        let (mut p2, mut q2) = (1u128, 0u128);
        let (mut p1, mut q1) = (0u128, 1u128);
        let mut out = Vec::with_capacity(depth);
        for k in 1..=depth {
            let a = self.coeff(k).expect("depth checked") as u128;
            let p = a * p1 + p2;
            let q = a * q1 + q2;
            out.push((p, q));
            p2 = p1;
            q2 = q1;
            p1 = p;
            q1 = q;
        }
        Ok(out)
    }

    pub fn convergent(&self, k: usize) -> Result<(u128, u128), RotationError> {
        if k == 0 {
            return Ok((0, 1));
        }
        Ok(*self.convergents(k)?.last().expect("k >= 1"))
    }

    /// Denominators `q_1, …, q_depth`.
    pub fn denominators(&self, depth: usize) -> Result<Vec<u128>, RotationError> {
        Ok(self.convergents(depth)?.into_iter().map(|c| c.1).collect())
    }

    /// Deepest available convergent, used as the working value of `α`.
    pub fn deep_convergent(&self) -> (u128, u128) {
        self.convergent(self.max_depth())
            .expect("max depth is available")
    }

    pub fn max_coefficient(&self) -> u64 {
        *self.coeffs.iter().max().expect("nonempty")
    }

    pub fn value_f64(&self) -> f64 {
        let (p, q) = self.deep_convergent();
        p as f64 / q as f64
    }
}
