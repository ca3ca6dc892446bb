//! Integer-valued step functions on the circle with rational breakpoints.

use serde::{Deserialize, Serialize};

use super::angle::Angle;
use super::RotationError;

/// Step function `f = v_i` on `[b_i, b_{i+1})`, with `b_0 = 0` and `b_m = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFunctionSpec {
    /// `(numerator, denominator)` pairs.
    pub breakpoints: Vec<(u64, u64)>,
    pub values: Vec<i64>,
}

impl StepFunctionSpec {
    /// `1_{[0,1/2)} - 1_{[1/2,1)}`.
    pub fn sign_halves() -> Self {
        Self {
            breakpoints: vec![(0, 1), (1, 2)],
            values: vec![1, -1],
        }
    }

    pub fn constant(v: i64) -> Self {
        Self {
            breakpoints: vec![(0, 1)],
            values: vec![v],
        }
    }

    pub fn compile(&self) -> Result<StepFunction, RotationError> {
        let m = self.breakpoints.len();
        if m == 0 || m != self.values.len() {
            return Err(RotationError::Config(
                "need one value per breakpoint".into(),
            ));
        }
        if self.breakpoints[0].0 != 0 {
            return Err(RotationError::Config("first breakpoint must be 0".into()));
        }
        let mut fixed = Vec::with_capacity(m);
        for (i, &(num, den)) in self.breakpoints.iter().enumerate() {
            if den == 0 || num >= den {
                return Err(RotationError::Config(format!(
                    "breakpoint {num}/{den} not in [0,1)"
                )));
            }
            if i > 0 {
                let (pn, pd) = self.breakpoints[i - 1];
                if (pn as u128) * (den as u128) >= (num as u128) * (pd as u128) {
                    return Err(RotationError::Config(
                        "breakpoints must be strictly increasing".into(),
                    ));
                }
            }
            fixed.push(Angle::from_fraction(num as u128, den as u128).expect("validated fraction"));
        }
        Ok(StepFunction {
            spec: self.clone(),
            fixed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StepFunction {
    spec: StepFunctionSpec,
    fixed: Vec<Angle>,
}

impl StepFunction {
    pub fn spec(&self) -> &StepFunctionSpec {
        &self.spec
    }

    /// Value at `y` (left-closed, right-open pieces) and the circle distance
    /// from `y` to the nearest breakpoint in raw fixed-point units.
    #[inline]
    pub fn eval(&self, y: Angle) -> (i64, u128) {
        let i = self.fixed.partition_point(|b| *b <= y) - 1;
        let mut dist = y.circle_distance(self.fixed[i]);
        if let Some(next) = self.fixed.get(i + 1) {
            dist = dist.min(y.circle_distance(*next));
        } else {
            dist = dist.min(y.circle_distance(Angle::ZERO));
        }
        (self.spec.values[i], dist)
    }

    /// Exact value at a rational point `num/den ∈ [0,1)`.
    pub fn eval_rational(&self, num: u128, den: u128) -> i64 {
        let mut value = self.spec.values[0];
        for (i, &(bn, bd)) in self.spec.breakpoints.iter().enumerate() {
            if (bn as u128) * den <= num * (bd as u128) {
                value = self.spec.values[i];
            }
        }
        value
    }

    /// `Σ |jumps|` at interior breakpoints.
    pub fn total_variation(&self) -> u64 {
        self.spec
            .values
            .windows(2)
            .map(|w| (w[1] - w[0]).unsigned_abs())
            .sum()
    }

    /// Variation on the circle, including the jump at `0 ≡ 1`.
    pub fn circle_variation(&self) -> u64 {
        let v = &self.spec.values;
        self.total_variation() + (v[0] - v[v.len() - 1]).unsigned_abs()
    }

    /// Lebesgue integral as an exact fraction `(numerator, denominator)`.
    pub fn integral(&self) -> (i128, i128) {
        let bps = &self.spec.breakpoints;
        let mut acc = (0i128, 1i128);
        for (i, &(bn, bd)) in bps.iter().enumerate() {
            let (en, ed) = bps.get(i + 1).copied().unwrap_or((1, 1));
            // length = en/ed - bn/bd
            let len_n = en as i128 * bd as i128 - bn as i128 * ed as i128;
            let len_d = ed as i128 * bd as i128;
            let term = (self.spec.values[i] as i128 * len_n, len_d);
            acc = reduce(acc.0 * term.1 + term.0 * acc.1, acc.1 * term.1);
        }
        acc
    }

    pub fn is_centered(&self) -> bool {
        self.integral().0 == 0
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn reduce(n: i128, d: i128) -> (i128, i128) {
    let g = gcd(n, d).max(1);
    (n / g, d / g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_halves_properties() {
        let f = StepFunctionSpec::sign_halves().compile().unwrap();
        assert!(f.is_centered());
        assert_eq!(f.total_variation(), 2);
        assert_eq!(f.circle_variation(), 4);
        assert_eq!(f.eval(Angle::ZERO).0, 1);
        assert_eq!(f.eval(Angle::from_f64(0.5).unwrap()).0, -1);
        assert_eq!(f.eval(Angle::from_f64(0.4999).unwrap()).0, 1);
        assert_eq!(f.eval(Angle(u128::MAX)).0, -1);
        assert_eq!(f.eval_rational(1, 2), -1);
        assert_eq!(f.eval_rational(0, 7), 1);
    }

    #[test]
    fn integral_of_uneven_pieces() {
        let spec = StepFunctionSpec {
            breakpoints: vec![(0, 1), (1, 3)],
            values: vec![2, -1],
        };
        let f = spec.compile().unwrap();
        // 2/3 - 2/3 = 0
        assert!(f.is_centered());
        let spec = StepFunctionSpec {
            breakpoints: vec![(0, 1), (1, 4)],
            values: vec![1, 0],
        };
        assert_eq!(spec.compile().unwrap().integral(), (1, 4));
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = [
            StepFunctionSpec {
                breakpoints: vec![(1, 2)],
                values: vec![1],
            },
            StepFunctionSpec {
                breakpoints: vec![(0, 1), (1, 2), (1, 3)],
                values: vec![1, 2, 3],
            },
            StepFunctionSpec {
                breakpoints: vec![(0, 1), (2, 2)],
                values: vec![1, 2],
            },
            StepFunctionSpec {
                breakpoints: vec![(0, 1)],
                values: vec![],
            },
        ];
        for b in bad {
            assert!(b.compile().is_err(), "{b:?}");
        }
    }
}
