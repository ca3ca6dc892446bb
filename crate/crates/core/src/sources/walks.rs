//! Random walks, coboundaries, finite-window functionals and explicit lists.

use rand_chacha::ChaCha8Rng;

use super::step::StepDistribution;
use super::{SiteSource, SourceError};
use crate::rng::stream_rng;
use crate::site::LatticeSite;

/// Partial sums `z_k = ζ_0 + … + ζ_k` of i.i.d. steps; the first emitted
/// value is the first step.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    law: StepDistribution,
    rng: ChaCha8Rng,
    position: LatticeSite,
}

impl RandomWalk {
    pub fn new(law: StepDistribution, seed: u64) -> Self {
        let position = LatticeSite::origin(law.dim()).expect("law has a valid dimension");
        Self {
            law,
            rng: stream_rng(seed),
            position,
        }
    }
}

impl SiteSource for RandomWalk {
    fn dim(&self) -> usize {
        self.law.dim()
    }

    #[inline]
    fn next_site(&mut self) -> Result<LatticeSite, SourceError> {
        let step = self.law.sample(&mut self.rng);
        self.position = self.position.checked_add(&step)?;
        Ok(self.position)
    }
}

/// Emits `z_k = ψ_k - ψ_0` for i.i.d. `ψ_k`, the ergodic sums of the
/// coboundary `Φ∘T - Φ` over a Bernoulli shift.
#[derive(Debug, Clone)]
pub struct Coboundary {
    law: StepDistribution,
    rng: ChaCha8Rng,
    psi0: Option<LatticeSite>,
    last_psi: Option<LatticeSite>,
}

impl Coboundary {
    pub fn new(law: StepDistribution, seed: u64) -> Self {
        Self {
            law,
            rng: stream_rng(seed),
            psi0: None,
            last_psi: None,
        }
    }

    /// The most recent draw `ψ_k`.
    pub fn last_psi(&self) -> Option<LatticeSite> {
        self.last_psi
    }

    pub fn psi0(&self) -> Option<LatticeSite> {
        self.psi0
    }
}

impl SiteSource for Coboundary {
    fn dim(&self) -> usize {
        self.law.dim()
    }

    fn next_site(&mut self) -> Result<LatticeSite, SourceError> {
        let psi = self.law.sample(&mut self.rng);
        let psi0 = *self.psi0.get_or_insert(psi);
        self.last_psi = Some(psi);
        Ok(psi.checked_sub(&psi0)?)
    }
}

/// Walk whose increments `g(ξ_j, …, ξ_{j+r-1})` depend on a sliding window of
/// an i.i.d. alphabet sequence.
#[derive(Debug, Clone)]
pub struct WindowFunctional {
    alphabet: StepDistribution,
    window: usize,
    table: Vec<LatticeSite>,
    dim: usize,
    rng: ChaCha8Rng,
    buffer: Vec<usize>,
    head: usize,
    primed: bool,
    position: LatticeSite,
}

impl WindowFunctional {
    /// `alphabet` is a law on one-dimensional symbols; `table` must assign a
    /// value to every word of length `window`.
    pub fn new(
        alphabet: StepDistribution,
        window: usize,
        table: &[(Vec<i64>, LatticeSite)],
        seed: u64,
    ) -> Result<Self, SourceError> {
        if alphabet.dim() != 1 {
            return Err(SourceError::Config(
                "window alphabet must be one-dimensional symbols".into(),
            ));
        }
        if window == 0 {
            return Err(SourceError::Config("window length must be positive".into()));
        }
        let symbols: Vec<i64> = alphabet.atoms().iter().map(|a| a.0.coords()[0]).collect();
        let k = symbols.len();
        let size = k
            .checked_pow(window as u32)
            .filter(|&s| s <= 1 << 24)
            .ok_or_else(|| SourceError::Config("window table too large".into()))?;
        let mut dense: Vec<Option<LatticeSite>> = vec![None; size];
        let mut dim = None;
        for (word, value) in table {
            if word.len() != window {
                return Err(SourceError::Config(format!(
                    "word {word:?} has length {} != {window}",
                    word.len()
                )));
            }
            let mut idx = 0usize;
            for (j, sym) in word.iter().enumerate() {
                let pos = symbols
                    .iter()
                    .position(|s| s == sym)
                    .ok_or_else(|| SourceError::Config(format!("symbol {sym} not in alphabet")))?;
                idx += pos * k.pow(j as u32);
            }
            match dim {
                None => dim = Some(value.dim()),
                Some(d) => value.ensure_dim(d)?,
            }
            dense[idx] = Some(*value);
        }
        let missing = dense.iter().filter(|v| v.is_none()).count();
        if missing > 0 {
            return Err(SourceError::IncompleteTable(missing));
        }
        let dim = dim.expect("nonempty table");
        Ok(Self {
            alphabet,
            window,
            table: dense.into_iter().map(Option::unwrap).collect(),
            dim,
            rng: stream_rng(seed),
            buffer: vec![0; window],
            head: 0,
            primed: false,
            position: LatticeSite::origin(dim).expect("valid dimension"),
        })
    }

    fn word_index(&self) -> usize {
        let k = self.alphabet.atoms().len();
        let mut idx = 0;
        let mut scale = 1;
        for j in 0..self.window {
            idx += self.buffer[(self.head + j) % self.window] * scale;
            scale *= k;
        }
        idx
    }
}

impl SiteSource for WindowFunctional {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_site(&mut self) -> Result<LatticeSite, SourceError> {
        if !self.primed {
            for j in 0..self.window - 1 {
                self.buffer[j] = self.alphabet.sample_index(&mut self.rng);
            }
            self.buffer[self.window - 1] = self.alphabet.sample_index(&mut self.rng);
            self.primed = true;
        } else {
            self.buffer[self.head] = self.alphabet.sample_index(&mut self.rng);
            self.head = (self.head + 1) % self.window;
        }
        let inc = self.table[self.word_index()];
        self.position = self.position.checked_add(&inc)?;
        Ok(self.position)
    }
}

/// Replays a fixed list, then reports exhaustion.
#[derive(Debug, Clone)]
pub struct Explicit {
    sites: Vec<LatticeSite>,
    dim: usize,
    pos: usize,
}

impl Explicit {
    pub fn new(sites: Vec<LatticeSite>) -> Result<Self, SourceError> {
        let dim = sites.first().ok_or(SourceError::Exhausted(0))?.dim();
        for s in &sites {
            s.ensure_dim(dim)?;
        }
        Ok(Self { sites, dim, pos: 0 })
    }
}

impl SiteSource for Explicit {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_site(&mut self) -> Result<LatticeSite, SourceError> {
        let s = *self
            .sites
            .get(self.pos)
            .ok_or(SourceError::Exhausted(self.pos))?;
        self.pos += 1;
        Ok(s)
    }
}
