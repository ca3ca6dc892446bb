//! Points of the circle `R/Z` as 128-bit fixed-point fractions.

use rand::Rng;

/// `raw / 2^128`; addition wraps, which is reduction mod 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Angle(pub u128);

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

impl Angle {
    pub const ZERO: Angle = Angle(0);

    /// `floor(num · 2^128 / den)` for `0 ≤ num < den < 2^127`, by binary long division.
    pub fn from_fraction(num: u128, den: u128) -> Option<Angle> {
        if den == 0 || num >= den || den >= 1 << 127 {
            return None;
        }
        let mut rem = num;
        let mut raw = 0u128;
        for _ in 0..128 {
            rem <<= 1;
            raw <<= 1;
            if rem >= den {
                rem -= den;
                raw |= 1;
            }
        }
        Some(Angle(raw))
    }

    /// Conversion of an `f64` in `[0, 1)`, exact down to `2^-128`.
    pub fn from_f64(x: f64) -> Option<Angle> {
        if !(0.0..1.0).contains(&x) {
            return None;
        }
        let hi_f = (x * TWO_POW_64).floor();
        let lo_f = ((x * TWO_POW_64) - hi_f) * TWO_POW_64;
        Some(Angle(((hi_f as u128) << 64) | lo_f as u128))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Angle {
        Angle(rng.random::<u128>())
    }

    pub fn to_f64(self) -> f64 {
        let hi = (self.0 >> 64) as u64 as f64;
        let lo = (self.0 as u64) as f64;
        (hi + lo / TWO_POW_64) / TWO_POW_64
    }

    #[inline]
    pub fn wrapping_add(self, other: Angle) -> Angle {
        Angle(self.0.wrapping_add(other.0))
    }

    /// Distance on the circle in raw units.
    #[inline]
    pub fn circle_distance(self, other: Angle) -> u128 {
        let d = self.0.wrapping_sub(other.0);
        d.min(d.wrapping_neg())
    }

    /// `k · self` mod 1.
    pub fn times(self, k: u128) -> Angle {
        Angle(self.0.wrapping_mul(k))
    }
}
