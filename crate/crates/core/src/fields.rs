//! Stationary random fields on `Z^d` evaluated site by site from a seed.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::rng::{bits_to_open01, site_bits};
use crate::site::{LatticeSite, SiteError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid field: {0}")]
    Invalid(String),
    #[error(transparent)]
    Site(#[from] SiteError),
    #[error("field has no uniform bound")]
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueAtom {
    pub value: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Innovation {
    Gaussian { sigma: f64 },
    Discrete { atoms: Vec<ValueAtom> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    IidUniform01,
    IidGaussian {
        mu: f64,
        sigma: f64,
    },
    IidDiscrete {
        atoms: Vec<ValueAtom>,
    },
    /// `X_ℓ = Σ_j a_j ξ_{ℓ + j e_1}` with nonnegative `a_j`.
    MovingAverage {
        weights: Vec<f64>,
        innovation: Innovation,
    },
}

/// Sorted atoms with cumulative probabilities, merged on equal values.
fn normalized_atoms(atoms: &[ValueAtom]) -> Result<Vec<(f64, f64)>, FieldError> {
    if atoms.is_empty() {
        return Err(FieldError::Invalid("discrete law needs atoms".into()));
    }
    let mut total = 0.0;
    for a in atoms {
        if !a.value.is_finite() || !(a.p > 0.0) || !a.p.is_finite() {
            return Err(FieldError::Invalid(format!(
                "bad atom {} with probability {}",
                a.value, a.p
            )));
        }
        total += a.p;
    }
    if (total - 1.0).abs() > crate::sources::PROBABILITY_TOLERANCE {
        return Err(FieldError::Invalid(format!("probabilities sum to {total}")));
    }
    let mut v: Vec<(f64, f64)> = atoms.iter().map(|a| (a.value, a.p / total)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (x, p) in v {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += p,
            _ => out.push((x, p)),
        }
    }
    Ok(out)
}

fn discrete_quantile(atoms: &[(f64, f64)], u: f64) -> f64 {
    let mut acc = 0.0;
    for &(x, p) in atoms {
        acc += p;
        if u < acc {
            return x;
        }
    }
    atoms.last().expect("nonempty").0
}

fn moments(atoms: &[(f64, f64)]) -> (f64, f64) {
    let mean: f64 = atoms.iter().map(|&(x, p)| x * p).sum();
    let var: f64 = atoms
        .iter()
        .map(|&(x, p)| (x - mean) * (x - mean) * p)
        .sum();
    (mean, var)
}

/// Largest support of an exactly convolved discrete moving average.
const MAX_CONVOLUTION_ATOMS: usize = 1 << 20;

impl FieldSpec {
    pub fn validate(&self) -> Result<(), FieldError> {
        match self {
            FieldSpec::IidUniform01 => Ok(()),
            FieldSpec::IidGaussian { mu, sigma } => {
                if !mu.is_finite() || !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(FieldError::Invalid(
                        "gaussian needs finite mu and sigma > 0".into(),
                    ));
                }
                Ok(())
            }
            FieldSpec::IidDiscrete { atoms } => normalized_atoms(atoms).map(|_| ()),
            FieldSpec::MovingAverage {
                weights,
                innovation,
            } => {
                if weights.is_empty() {
                    return Err(FieldError::Invalid("moving average needs weights".into()));
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(FieldError::Invalid(
                        "moving-average weights must be nonnegative".into(),
                    ));
                }
                if weights.iter().all(|&w| w == 0.0) {
                    return Err(FieldError::Invalid(
                        "moving-average weights are all zero".into(),
                    ));
                }
                match innovation {
                    Innovation::Gaussian { sigma } if !(*sigma > 0.0) || !sigma.is_finite() => Err(
                        FieldError::Invalid("innovation sigma must be positive".into()),
                    ),
                    Innovation::Gaussian { .. } => Ok(()),
                    Innovation::Discrete { atoms } => normalized_atoms(atoms).map(|_| ()),
                }
            }
        }
    }

    /// Value at `site` under `seed`; a pure function of its arguments.
    pub fn site_value(&self, seed: u64, site: &LatticeSite) -> f64 {
        match self {
            FieldSpec::IidUniform01 => bits_to_open01(site_bits(seed, 0, site)),
            FieldSpec::IidGaussian { mu, sigma } => mu + sigma * std_normal(seed, site),
            FieldSpec::IidDiscrete { atoms } => {
                let a = normalized_atoms(atoms).expect("validated field");
                discrete_quantile(&a, bits_to_open01(site_bits(seed, 0, site)))
            }
            FieldSpec::MovingAverage {
                weights,
                innovation,
            } => {
                let atoms = match innovation {
                    Innovation::Discrete { atoms } => {
                        Some(normalized_atoms(atoms).expect("validated field"))
                    }
                    Innovation::Gaussian { .. } => None,
                };
                let mut coords = [0i64; crate::site::MAX_DIM];
                coords[..site.dim()].copy_from_slice(site.coords());
                let mut x = 0.0;
                for (j, a) in weights.iter().enumerate() {
                    let mut c = coords;
                    c[0] = c[0].wrapping_add(j as i64);
                    let shifted = LatticeSite::new(&c[..site.dim()]).expect("valid dimension");
                    let xi = match &atoms {
                        Some(a) => {
                            discrete_quantile(a, bits_to_open01(site_bits(seed, 0, &shifted)))
                        }
                        None => match innovation {
                            Innovation::Gaussian { sigma } => sigma * std_normal(seed, &shifted),
                            Innovation::Discrete { .. } => unreachable!("atoms parsed above"),
                        },
                    };
                    x += a * xi;
                }
                x
            }
        }
    }

    /// `F(s) = P(X ≤ s)`.
    pub fn cdf(&self, s: f64) -> f64 {
        self.cdf_impl(s, false)
    }

    /// `F(s⁻) = P(X < s)`.
    pub fn cdf_left(&self, s: f64) -> f64 {
        self.cdf_impl(s, true)
    }

    fn cdf_impl(&self, s: f64, strict: bool) -> f64 {
        let step = |atoms: &[(f64, f64)]| -> f64 {
            let c: f64 = atoms
                .iter()
                .filter(|&&(x, _)| if strict { x < s } else { x <= s })
                .map(|&(_, p)| p)
                .sum();
            c.min(1.0)
        };
        match self {
            FieldSpec::IidUniform01 => s.clamp(0.0, 1.0),
            FieldSpec::IidGaussian { mu, sigma } => {
                Normal::new(*mu, *sigma).expect("validated field").cdf(s)
            }
            FieldSpec::IidDiscrete { atoms } => {
                step(&normalized_atoms(atoms).expect("validated field"))
            }
            FieldSpec::MovingAverage {
                innovation: Innovation::Gaussian { .. },
                ..
            } => Normal::new(self.mean(), self.variance().sqrt())
                .expect("positive variance")
                .cdf(s),
            FieldSpec::MovingAverage { .. } => {
                step(&self.marginal_atoms().expect("small convolution"))
            }
        }
    }

    /// Exact marginal law of a discrete-valued field.
    pub fn marginal_atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            FieldSpec::IidDiscrete { atoms } => normalized_atoms(atoms).ok(),
            FieldSpec::MovingAverage {
                weights,
                innovation: Innovation::Discrete { atoms },
            } => {
                let base = normalized_atoms(atoms).ok()?;
                let mut dist: Vec<(f64, f64)> = vec![(0.0, 1.0)];
                for &a in weights {
                    if dist.len() * base.len() > MAX_CONVOLUTION_ATOMS {
                        return None;
                    }
                    let mut next: Vec<(f64, f64)> = Vec::with_capacity(dist.len() * base.len());
                    for &(x, p) in &dist {
                        for &(y, q) in &base {
                            next.push((x + a * y, p * q));
                        }
                    }
                    next.sort_by(|u, v| u.0.total_cmp(&v.0));
                    dist.clear();
                    for (x, p) in next {
                        match dist.last_mut() {
                            Some(last) if last.0 == x => last.1 += p,
                            _ => dist.push((x, p)),
                        }
                    }
                }
                Some(dist)
            }
            _ => None,
        }
    }

    fn innovation_moments(innovation: &Innovation) -> (f64, f64) {
        match innovation {
            Innovation::Gaussian { sigma } => (0.0, sigma * sigma),
            Innovation::Discrete { atoms } => {
                moments(&normalized_atoms(atoms).expect("validated field"))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            FieldSpec::IidUniform01 => 0.5,
            FieldSpec::IidGaussian { mu, .. } => *mu,
            FieldSpec::IidDiscrete { atoms } => {
                moments(&normalized_atoms(atoms).expect("validated field")).0
            }
            FieldSpec::MovingAverage {
                weights,
                innovation,
            } => Self::innovation_moments(innovation).0 * weights.iter().sum::<f64>(),
        }
    }

    pub fn variance(&self) -> f64 {
        self.covariance(&LatticeSite::scalar(0))
    }

    /// Largest shift `m` with a nonzero weight window `a_0, …, a_m`.
    pub fn window(&self) -> usize {
        match self {
            FieldSpec::MovingAverage { weights, .. } => weights.len() - 1,
            _ => 0,
        }
    }

    /// `Cov(X_{r+lag}, X_r)`.
    pub fn covariance(&self, lag: &LatticeSite) -> f64 {
        let axis_lag = match axis_lag(lag) {
            Some(k) => k,
            None => return 0.0,
        };
        match self {
            FieldSpec::MovingAverage {
                weights,
                innovation,
            } => {
                let var = Self::innovation_moments(innovation).1;
                let k = axis_lag.unsigned_abs() as usize;
                if k >= weights.len() {
                    return 0.0;
                }
                var * (0..weights.len() - k)
                    .map(|j| weights[j] * weights[j + k])
                    .sum::<f64>()
            }
            _ if axis_lag != 0 => 0.0,
            FieldSpec::IidUniform01 => 1.0 / 12.0,
            FieldSpec::IidGaussian { sigma, .. } => sigma * sigma,
            FieldSpec::IidDiscrete { atoms } => {
                moments(&normalized_atoms(atoms).expect("validated field")).1
            }
        }
    }

    /// Lags (along the first axis, in dimension `dim`) where the covariance may
    /// be nonzero.
    pub fn covariance_support(&self, dim: usize) -> Vec<LatticeSite> {
        let m = self.window() as i64;
        (-m..=m)
            .map(|k| {
                let mut c = [0i64; crate::site::MAX_DIM];
                c[0] = k;
                LatticeSite::new(&c[..dim]).expect("valid dimension")
            })
            .collect()
    }

    /// Upper bound on the mixing coefficient between `X_r` and `X_{r+lag}`.
    pub fn mixing_bound(&self, lag: &LatticeSite) -> f64 {
        match axis_lag(lag) {
            Some(k) if k.unsigned_abs() as usize <= self.window() => 0.25,
            _ => 0.0,
        }
    }

    /// `sup |X|` when finite.
    pub fn bound(&self) -> Option<f64> {
        match self {
            FieldSpec::IidUniform01 => Some(1.0),
            FieldSpec::IidGaussian { .. } => None,
            FieldSpec::IidDiscrete { atoms } => {
                atoms.iter().map(|a| a.value.abs()).reduce(f64::max)
            }
            FieldSpec::MovingAverage {
                weights,
                innovation: Innovation::Discrete { atoms },
            } => {
                let m = atoms.iter().map(|a| a.value.abs()).reduce(f64::max)?;
                Some(m * weights.iter().sum::<f64>())
            }
            FieldSpec::MovingAverage { .. } => None,
        }
    }

    pub fn supported_in_unit_interval(&self) -> bool {
        match self {
            FieldSpec::IidUniform01 => true,
            FieldSpec::IidGaussian { .. } => false,
            _ => self
                .marginal_atoms()
                .is_some_and(|a| a.iter().all(|&(x, _)| (0.0..=1.0).contains(&x))),
        }
    }
}

/// First-axis offset of `lag` if all other coordinates vanish.
fn axis_lag(lag: &LatticeSite) -> Option<i64> {
    let c = lag.coords();
    c[1..].iter().all(|&x| x == 0).then_some(c[0])
}

/// Box-Muller on two independent site lanes.
fn std_normal(seed: u64, site: &LatticeSite) -> f64 {
    let u1 = bits_to_open01(site_bits(seed, 1, site));
    let u2 = bits_to_open01(site_bits(seed, 2, site));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A field spec bound to an index dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    spec: FieldSpec,
    dim: usize,
}

impl Field {
    pub fn new(spec: FieldSpec, dim: usize) -> Result<Self, FieldError> {
        spec.validate()?;
        if dim == 0 || dim > crate::site::MAX_DIM {
            return Err(SiteError::BadDimension(dim).into());
        }
        Ok(Self { spec, dim })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn site_value(&self, seed: u64, site: &LatticeSite) -> Result<f64, FieldError> {
        site.ensure_dim(self.dim)?;
        Ok(self.spec.site_value(seed, site))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ma11() -> FieldSpec {
        FieldSpec::MovingAverage {
            weights: vec![1.0, 1.0],
            innovation: Innovation::Gaussian { sigma: 1.0 },
        }
    }

    fn coin() -> FieldSpec {
        FieldSpec::IidDiscrete {
            atoms: vec![
                ValueAtom { value: 0.0, p: 0.5 },
                ValueAtom { value: 1.0, p: 0.5 },
            ],
        }
    }

    fn s(x: i64) -> LatticeSite {
        LatticeSite::scalar(x)
    }

    #[test]
    fn pure_evaluation() {
        let site = LatticeSite::new(&[3, -4]).unwrap();
        for f in [FieldSpec::IidUniform01, ma11(), coin()] {
            assert_eq!(f.site_value(9, &site), f.site_value(9, &site));
        }
        assert_ne!(
            FieldSpec::IidUniform01.site_value(9, &site),
            FieldSpec::IidUniform01.site_value(10, &site)
        );
    }

    #[test]
    fn moving_average_is_sum_of_innovations() {
        let g = FieldSpec::IidGaussian {
            mu: 0.0,
            sigma: 1.0,
        };
        for x in -5..5 {
            let v = ma11().site_value(4, &s(x));
            let w = g.site_value(4, &s(x)) + g.site_value(4, &s(x + 1));
            assert!((v - w).abs() < 1e-15);
        }
    }

    #[test]
    fn cdfs() {
        assert_eq!(FieldSpec::IidUniform01.cdf(0.3), 0.3);
        assert_eq!(FieldSpec::IidUniform01.cdf(-1.0), 0.0);
        let n = Normal::new(0.0, 1.0).unwrap();
        for t in [-1.3, 0.0, 0.4, 2.2] {
            assert!((ma11().cdf(t) - n.cdf(t / 2f64.sqrt())).abs() < 1e-15);
        }
        assert_eq!(coin().cdf(0.0), 0.5);
        assert_eq!(coin().cdf(0.5), 0.5);
        assert_eq!(coin().cdf(1.0), 1.0);
        assert_eq!(coin().cdf_left(1.0), 0.5);
        assert_eq!(coin().cdf_left(0.0), 0.0);
    }

    #[test]
    fn discrete_moving_average_marginal() {
        let f = FieldSpec::MovingAverage {
            weights: vec![0.5, 0.5],
            innovation: Innovation::Discrete {
                atoms: vec![
                    ValueAtom { value: 0.0, p: 0.5 },
                    ValueAtom { value: 1.0, p: 0.5 },
                ],
            },
        };
        assert_eq!(
            f.marginal_atoms().unwrap(),
            vec![(0.0, 0.25), (0.5, 0.5), (1.0, 0.25)]
        );
        assert!(f.supported_in_unit_interval());
        assert_eq!(f.bound(), Some(1.0));
        assert!((f.variance() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn covariances() {
        let u = FieldSpec::IidUniform01;
        assert_eq!(u.covariance(&s(0)), 1.0 / 12.0);
        assert_eq!(u.covariance(&s(3)), 0.0);
        assert_eq!(ma11().covariance(&s(0)), 2.0);
        assert_eq!(ma11().covariance(&s(1)), 1.0);
        assert_eq!(ma11().covariance(&s(-1)), 1.0);
        assert_eq!(ma11().covariance(&s(2)), 0.0);
        assert_eq!(ma11().covariance(&LatticeSite::new(&[0, 1]).unwrap()), 0.0);
        let w = vec![0.3, 1.0, 2.5];
        let f = FieldSpec::MovingAverage {
            weights: w.clone(),
            innovation: Innovation::Gaussian { sigma: 1.5 },
        };
        let total: f64 = f
            .covariance_support(1)
            .iter()
            .map(|l| f.covariance(l))
            .sum();
        let want = w.iter().sum::<f64>().powi(2) * 2.25;
        assert!((total - want).abs() < 1e-12);
    }

    #[test]
    fn mixing_bounds() {
        let ma1 = ma11();
        assert_eq!(FieldSpec::IidUniform01.mixing_bound(&s(1)), 0.0);
        assert_eq!(ma1.mixing_bound(&s(2)), 0.0);
        assert_eq!(ma1.mixing_bound(&s(1)), 0.25);
        assert_eq!(ma1.mixing_bound(&LatticeSite::new(&[1, 1]).unwrap()), 0.0);
    }

    #[test]
    fn validation() {
        assert!(FieldSpec::IidGaussian {
            mu: 0.0,
            sigma: 0.0
        }
        .validate()
        .is_err());
        let neg = FieldSpec::MovingAverage {
            weights: vec![1.0, -0.1],
            innovation: Innovation::Gaussian { sigma: 1.0 },
        };
        assert!(neg.validate().is_err());
        let bad = FieldSpec::IidDiscrete {
            atoms: vec![ValueAtom { value: 0.0, p: 0.7 }],
        };
        assert!(bad.validate().is_err());
        assert!(Field::new(FieldSpec::IidUniform01, 2)
            .unwrap()
            .site_value(0, &s(1))
            .is_err());
    }

    #[test]
    fn uniform_mean() {
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|k| FieldSpec::IidUniform01.site_value(1, &s(k)))
            .sum::<f64>()
            / n as f64;
        let se = 1.0 / (12.0 * n as f64).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn gaussian_moments() {
        let f = FieldSpec::IidGaussian {
            mu: 2.0,
            sigma: 3.0,
        };
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|k| f.site_value(5, &s(k))).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 4.0 * 3.0 / (n as f64).sqrt());
        assert!((var / 9.0 - 1.0).abs() < 0.02);
    }
}
