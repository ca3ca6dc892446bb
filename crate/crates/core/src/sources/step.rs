//! Finite step laws on `Z^d` and their recurrence/aperiodicity classification.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::SourceError;
use crate::site::LatticeSite;

pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// One atom of a finite law as it appears in plan files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub site: LatticeSite,
    pub p: f64,
}

/// A finite law on `Z^d`, validated and renormalized, with an alias sampler.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    dim: usize,
    atoms: Vec<(LatticeSite, f64)>,
    sampler: WeightedAliasIndex<f64>,
}

impl PartialEq for StepDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
    }
}

impl StepDistribution {
    pub fn new(atoms: Vec<(LatticeSite, f64)>) -> Result<Self, SourceError> {
        let first = atoms
            .first()
            .ok_or_else(|| SourceError::InvalidLaw("no atoms".into()))?;
        let dim = first.0.dim();
        let mut total = 0.0;
        for (i, (site, p)) in atoms.iter().enumerate() {
            site.ensure_dim(dim)?;
            if !(*p > 0.0) || !p.is_finite() {
                return Err(SourceError::InvalidLaw(format!(
                    "atom {i} has non-positive probability {p}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(SourceError::InvalidLaw(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut sorted: Vec<LatticeSite> = atoms.iter().map(|a| a.0).collect();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(SourceError::InvalidLaw("duplicate atom sites".into()));
        }
        let atoms: Vec<(LatticeSite, f64)> =
            atoms.into_iter().map(|(s, p)| (s, p / total)).collect();
        let weights: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let sampler = WeightedAliasIndex::new(weights)
            .map_err(|e| SourceError::InvalidLaw(format!("alias table: {e}")))?;
        Ok(Self {
            dim,
            atoms,
            sampler,
        })
    }

    pub fn from_atoms(atoms: &[Atom]) -> Result<Self, SourceError> {
        Self::new(atoms.iter().map(|a| (a.site, a.p)).collect())
    }

    /// Uniform law on the given sites.
    pub fn uniform(sites: &[LatticeSite]) -> Result<Self, SourceError> {
        let p = 1.0 / sites.len().max(1) as f64;
        Self::new(sites.iter().map(|s| (*s, p)).collect())
    }

    /// `P(±1) = 1/2` on `Z`.
    pub fn simple_1d() -> Self {
        Self::simple(1)
    }

    /// Nearest-neighbour walk on `Z^d`, probability `1/(2d)` per neighbour.
    pub fn simple(dim: usize) -> Self {
        let mut sites = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            let e = LatticeSite::unit(dim, axis).expect("valid dimension");
            sites.push(e);
            sites.push(e.checked_neg().expect("unit vector"));
        }
        Self::uniform(&sites).expect("simple walk law is valid")
    }

    /// Centered aperiodic walk on `Z^2` with atoms `(1,0), (0,1), (-1,-1)`.
    pub fn triangular_2d() -> Self {
        let sites = [[1, 0], [0, 1], [-1, -1]].map(|c| LatticeSite::new(&c).unwrap());
        Self::uniform(&sites).expect("triangular law is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(LatticeSite, f64)] {
        &self.atoms
    }

    pub fn to_atoms(&self) -> Vec<Atom> {
        self.atoms
            .iter()
            .map(|(site, p)| Atom { site: *site, p: *p })
            .collect()
    }

    #[inline]
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticeSite {
        self.atoms[self.sample_index(rng)].0
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (s, p) in &self.atoms {
            for (mi, c) in m.iter_mut().zip(s.coords()) {
                *mi += p * *c as f64;
            }
        }
        m
    }

    /// Covariance matrix `Γ` of one step, row-major.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let m = self.mean();
        let d = self.dim;
        let mut g = vec![vec![0.0; d]; d];
        for (s, p) in &self.atoms {
            let c = s.coords();
            for i in 0..d {
                for j in 0..d {
                    g[i][j] += p * (c[i] as f64 - m[i]) * (c[j] as f64 - m[j]);
                }
            }
        }
        g
    }

    /// Largest sup-norm of an atom.
    pub fn radius(&self) -> u64 {
        self.atoms.iter().map(|a| a.0.sup_norm()).max().unwrap_or(0)
    }

    pub fn is_centered(&self) -> bool {
        self.mean().iter().all(|m| m.abs() < 1e-12)
    }

    pub fn classify(&self) -> Classification {
        classify(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    Recurrent,
    Transient,
    DeterministicExcluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub recurrence: Recurrence,
    /// The support generates all of `Z^d`.
    pub aperiodic: bool,
    pub centered: bool,
}

pub fn classify(dist: &StepDistribution) -> Classification {
    let vectors: Vec<Vec<i128>> = dist
        .atoms
        .iter()
        .map(|(s, _)| s.coords().iter().map(|&c| c as i128).collect())
        .collect();
    let aperiodic = lattice_index(&vectors, dist.dim) == Some(1);
    let centered = dist.is_centered();
    let recurrence = if dist.atoms.len() == 1 {
        Recurrence::DeterministicExcluded
    } else if centered && dist.dim <= 2 {
        Recurrence::Recurrent
    } else {
        Recurrence::Transient
    };
    Classification {
        recurrence,
        aperiodic,
        centered,
    }
}

/// Index `[Z^d : L]` of the subgroup generated by `vectors`, or `None` when
/// they do not span a full-rank lattice. Computed by integer row reduction
/// to Hermite form; the index is the product of the pivots.
pub fn lattice_index(vectors: &[Vec<i128>], dim: usize) -> Option<u128> {
    let mut rows: Vec<Vec<i128>> = vectors
        .iter()
        .filter(|v| v.iter().any(|&x| x != 0))
        .cloned()
        .collect();
    let mut index: u128 = 1;
    let mut r = 0;
    for col in 0..dim {
        loop {
            let pivot = (r..rows.len())
                .filter(|&i| rows[i][col] != 0)
                .min_by_key(|&i| rows[i][col].unsigned_abs());
            let Some(p) = pivot else { return None };
            rows.swap(r, p);
            let mut done = true;
            for i in r + 1..rows.len() {
                if rows[i][col] != 0 {
                    let q = rows[i][col] / rows[r][col];
                    for j in 0..dim {
                        rows[i][j] = rows[i][j].checked_sub(q.checked_mul(rows[r][j])?)?;
                    }
                    if rows[i][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        index = index.checked_mul(rows[r][col].unsigned_abs())?;
        r += 1;
    }
    Some(index)
}
