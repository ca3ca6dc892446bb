//! Points of the integer lattice `Z^d`.

use std::fmt;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest lattice dimension supported by [`LatticeSite`].
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SiteError {
    #[error("lattice dimension {0} outside 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate overflow")]
    Overflow,
}

/// A site of `Z^d`, stored inline so it can be used as a cheap hash key.
///
/// Unused trailing coordinates are always zero, so derived equality and
/// hashing agree with coordinate-wise equality.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeSite {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl LatticeSite {
    pub fn new(coords: &[i64]) -> Result<Self, SiteError> {
        let d = coords.len();
        if d == 0 || d > MAX_DIM {
            return Err(SiteError::BadDimension(d));
        }
        let mut c = [0i64; MAX_DIM];
        c[..d].copy_from_slice(coords);
        Ok(Self {
            dim: d as u8,
            coords: c,
        })
    }

    pub fn origin(dim: usize) -> Result<Self, SiteError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(SiteError::BadDimension(dim));
        }
        Ok(Self {
            dim: dim as u8,
            coords: [0; MAX_DIM],
        })
    }

    /// One-dimensional site.
    pub fn scalar(x: i64) -> Self {
        let mut c = [0i64; MAX_DIM];
        c[0] = x;
        Self { dim: 1, coords: c }
    }

    /// Unit vector along axis `axis`.
    pub fn unit(dim: usize, axis: usize) -> Result<Self, SiteError> {
        let mut s = Self::origin(dim)?;
        if axis >= dim {
            return Err(SiteError::DimensionMismatch {
                expected: dim,
                got: axis + 1,
            });
        }
        s.coords[axis] = 1;
        Ok(s)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<(), SiteError> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(SiteError::DimensionMismatch {
                expected,
                got: self.dim(),
            })
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, SiteError> {
        self.ensure_dim(other.dim())?;
        let mut out = *self;
        for (a, b) in out.coords.iter_mut().zip(other.coords.iter()) {
            *a = a.checked_add(*b).ok_or(SiteError::Overflow)?;
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, SiteError> {
        self.ensure_dim(other.dim())?;
        let mut out = *self;
        for (a, b) in out.coords.iter_mut().zip(other.coords.iter()) {
            *a = a.checked_sub(*b).ok_or(SiteError::Overflow)?;
        }
        Ok(out)
    }

    pub fn checked_neg(&self) -> Result<Self, SiteError> {
        let mut out = *self;
        for a in out.coords.iter_mut() {
            *a = a.checked_neg().ok_or(SiteError::Overflow)?;
        }
        Ok(out)
    }

    /// Sup norm `max_i |x_i|`.
    pub fn sup_norm(&self) -> u64 {
        self.coords()
            .iter()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Space-separated coordinates, the per-line format of explicit sequence files.
    pub fn to_line(&self) -> String {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        parts.join(" ")
    }
}

impl fmt::Debug for LatticeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for LatticeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for LatticeSite {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim()))?;
        for c in self.coords() {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for LatticeSite {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SiteVisitor;
        impl<'de> Visitor<'de> for SiteVisitor {
            type Value = LatticeSite;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "an array of 1..={MAX_DIM} integers")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<LatticeSite, A::Error> {
                let mut coords = Vec::with_capacity(MAX_DIM);
                while let Some(c) = seq.next_element::<i64>()? {
                    coords.push(c);
                }
                LatticeSite::new(&coords).map_err(de::Error::custom)
            }
        }
        deserializer.deserialize_seq(SiteVisitor)
    }
}

/// Parses one site per non-empty line, coordinates separated by whitespace.
/// Lines starting with `#` are skipped.
pub fn parse_site_lines(text: &str) -> Result<Vec<LatticeSite>, String> {
    let mut out = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords: Result<Vec<i64>, _> = line.split_whitespace().map(str::parse::<i64>).collect();
        let coords = coords.map_err(|e| format!("line {}: {e}", lineno + 1))?;
        let site = LatticeSite::new(&coords).map_err(|e| format!("line {}: {e}", lineno + 1))?;
        match dim {
            None => dim = Some(site.dim()),
            Some(d) if d != site.dim() => {
                return Err(format!(
                    "line {}: dimension {} differs from {d}",
                    lineno + 1,
                    site.dim()
                ))
            }
            _ => {}
        }
        out.push(site);
    }
    Ok(out)
}
