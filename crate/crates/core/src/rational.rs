//! Exact rationals over 128-bit integers.
//!
//! Every operation is checked; an overflow aborts with a message naming the
//! operands instead of silently wrapping.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};

use crate::error::Error;

/// A reduced fraction `num / den` with `den > 0`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ExactRational(Ratio<i128>);

impl ExactRational {
    pub const ZERO: Self = Self(Ratio::new_raw(0, 1));
    pub const ONE: Self = Self(Ratio::new_raw(1, 1));

    /// Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "ExactRational with zero denominator");
        Self(Ratio::new(num, den))
    }

    pub fn from_int(v: i128) -> Self {
        Self(Ratio::from_integer(v))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Self(self.0.abs())
    }

    pub fn to_f64(&self) -> f64 {
        let (n, d) = (self.numer(), self.denom());
        let q = n / d;
        q as f64 + (n - q * d) as f64 / d as f64
    }

    pub fn checked_add(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_add(&rhs.0).map(Self)
    }

    pub fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_sub(&rhs.0).map(Self)
    }

    pub fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_mul(&rhs.0).map(Self)
    }

    pub fn checked_div(&self, rhs: &Self) -> Option<Self> {
        if rhs.is_zero() {
            return None;
        }
        self.0.checked_div(&rhs.0).map(Self)
    }

    pub fn recip(&self) -> Self {
        Self::ONE / *self
    }
}

macro_rules! checked_binop {
    ($tr:ident, $method:ident, $checked:ident, $sym:literal) => {
        impl $tr for ExactRational {
            type Output = Self;
            fn $method(self, rhs: Self) -> Self {
                self.$checked(&rhs).unwrap_or_else(|| {
                    panic!("ExactRational overflow: {} {} {}", self, $sym, rhs)
                })
            }
        }
        impl<'a> $tr<&'a ExactRational> for ExactRational {
            type Output = Self;
            fn $method(self, rhs: &'a ExactRational) -> Self {
                self.$method(*rhs)
            }
        }
    };
}

checked_binop!(Add, add, checked_add, "+");
checked_binop!(Sub, sub, checked_sub, "-");
checked_binop!(Mul, mul, checked_mul, "*");
checked_binop!(Div, div, checked_div, "/");

impl Neg for ExactRational {
    type Output = Self;
    fn neg(self) -> Self {
        Self::ZERO - self
    }
}

impl Sum for ExactRational {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl PartialOrd for ExactRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactRational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl From<i64> for ExactRational {
    fn from(v: i64) -> Self {
        Self::from_int(v as i128)
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `"a"`, `"a/b"` and terminating decimals such as `"-0.125"`.
impl FromStr for ExactRational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a rational: {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Self::new(n, d));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) || frac.len() > 30 {
                return Err(bad());
            }
            let neg = int.starts_with('-');
            let int_abs: i128 = match int.trim_start_matches(['-', '+']) {
                "" => 0,
                t => t.parse().map_err(|_| bad())?,
            };
            let scale = 10i128.pow(frac.len() as u32);
            let frac_v: i128 = frac.parse().map_err(|_| bad())?;
            let num = int_abs
                .checked_mul(scale)
                .and_then(|v| v.checked_add(frac_v))
                .ok_or_else(bad)?;
            return Ok(Self::new(if neg { -num } else { num }, scale));
        }
        let n: i128 = s.parse().map_err(|_| bad())?;
        Ok(Self::from_int(n))
    }
}

impl serde::Serialize for ExactRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_normalizes_sign() {
        let r = ExactRational::new(6, -8);
        assert_eq!(r.numer(), -3);
        assert_eq!(r.denom(), 4);
        assert_eq!(r.to_string(), "-3/4");
    }

    #[test]
    fn parses_forms() {
        assert_eq!("3/6".parse::<ExactRational>().unwrap(), ExactRational::new(1, 2));
        assert_eq!("-0.125".parse::<ExactRational>().unwrap(), ExactRational::new(-1, 8));
        assert_eq!("7".parse::<ExactRational>().unwrap(), ExactRational::from_int(7));
        assert!("1/0".parse::<ExactRational>().is_err());
        assert!("abc".parse::<ExactRational>().is_err());
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn overflow_panics() {
        let big = ExactRational::from_int(i128::MAX / 2);
        let _ = big * ExactRational::from_int(4);
    }
}
