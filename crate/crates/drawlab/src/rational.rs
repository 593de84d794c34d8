//! Minimal exact rational arithmetic for the enumeration oracles.
//!
//! Fixture-sized instances keep numerators and denominators tiny, so a
//! reduced `i128` fraction suffices. All operations are overflow-checked;
//! [`Prob`] degrades to floating point instead of wrapping, and the caller
//! can tell from the result which arithmetic survived.

use std::fmt;

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A reduced fraction with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i128,
    den: i128,
}

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    /// Builds `num/den` in lowest terms. Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Rational {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn num(&self) -> i128 {
        self.num
    }

    pub fn den(&self) -> i128 {
        self.den
    }

    pub fn checked_add(self, other: Rational) -> Option<Rational> {
        let g = gcd(self.den, other.den).max(1);
        let da = self.den / g;
        let db = other.den / g;
        let num = self
            .num
            .checked_mul(db)?
            .checked_add(other.num.checked_mul(da)?)?;
        let den = self.den.checked_mul(db)?;
        Some(Rational::new(num, den))
    }

    pub fn checked_mul(self, other: Rational) -> Option<Rational> {
        // Cross-reduce first to delay overflow.
        let g1 = gcd(self.num, other.den).max(1);
        let g2 = gcd(other.num, self.den).max(1);
        let num = (self.num / g1).checked_mul(other.num / g2)?;
        let den = (self.den / g2).checked_mul(other.den / g1)?;
        Some(Rational::new(num, den))
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// A probability that is exact while the arithmetic stays in range and
/// silently (but observably) falls back to `f64` on overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prob {
    Exact(Rational),
    Approx(f64),
}

impl Prob {
    pub const ZERO: Prob = Prob::Exact(Rational::ZERO);
    pub const ONE: Prob = Prob::Exact(Rational::ONE);

    pub fn ratio(num: i128, den: i128) -> Prob {
        Prob::Exact(Rational::new(num, den))
    }

    pub fn add(self, other: Prob) -> Prob {
        match (self, other) {
            (Prob::Exact(a), Prob::Exact(b)) => match a.checked_add(b) {
                Some(r) => Prob::Exact(r),
                None => Prob::Approx(a.to_f64() + b.to_f64()),
            },
            _ => Prob::Approx(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(self, other: Prob) -> Prob {
        match (self, other) {
            (Prob::Exact(a), Prob::Exact(b)) => match a.checked_mul(b) {
                Some(r) => Prob::Exact(r),
                None => Prob::Approx(a.to_f64() * b.to_f64()),
            },
            _ => Prob::Approx(self.to_f64() * other.to_f64()),
        }
    }

    /// Multiplies by `num/den`.
    pub fn mul_ratio(self, num: u64, den: u64) -> Prob {
        self.mul(Prob::ratio(num as i128, den as i128))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Prob::Exact(r) => r.to_f64(),
            Prob::Approx(v) => v,
        }
    }

    pub fn exact(self) -> Option<Rational> {
        match self {
            Prob::Exact(r) => Some(r),
            Prob::Approx(_) => None,
        }
    }
}
