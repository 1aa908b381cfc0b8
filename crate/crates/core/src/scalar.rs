//! Two-mode scalar tower: exact rationals with arbitrary precision, or `f64`.
//!
//! Polynomial identities must come out exactly zero, while exponential rates
//! like sqrt(2) force floating point. Mixing the two modes in an arithmetic
//! operation promotes the result to float; the mode tag on the result records
//! that the promotion happened.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(BigRational),
    Float(f64),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(n)))
    }

    /// Exact rational `num/den`; panics if `den == 0`.
    pub fn rational(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn float(x: f64) -> Self {
        Scalar::Float(x)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Float(x) => *x == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Exact(r) => r == &BigRational::from_integer(BigInt::from(1)),
            Scalar::Float(x) => *x == 1.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_negative(),
            Scalar::Float(x) => *x < 0.0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => r.to_f64().unwrap_or_else(|| {
                // Fall back to separate integer conversions for huge ratios.
                let n = r.numer().to_f64().unwrap_or(f64::NAN);
                let d = r.denom().to_f64().unwrap_or(f64::NAN);
                n / d
            }),
            Scalar::Float(x) => *x,
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Float(x) => Scalar::Float(x.abs()),
        }
    }

    pub fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }

    /// Division; `None` when the divisor is zero in either mode.
    pub fn checked_div(&self, rhs: &Scalar) -> Option<Scalar> {
        if rhs.is_zero() {
            return None;
        }
        Some(match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a / b),
            (a, b) => Scalar::Float(a.to_f64() / b.to_f64()),
        })
    }

    pub fn pow(&self, n: u32) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(num_traits::pow::pow(r.clone(), n as usize)),
            Scalar::Float(x) => Scalar::Float(x.powi(n as i32)),
        }
    }

    /// Square root: stays exact when the rational is a perfect square of a
    /// rational, otherwise promotes to float. `None` for negative input.
    pub fn sqrt(&self) -> Option<Scalar> {
        if self.is_negative() {
            return None;
        }
        match self {
            Scalar::Exact(r) => {
                let n = r.numer().sqrt();
                let d = r.denom().sqrt();
                if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
                    Some(Scalar::Exact(BigRational::new(n, d)))
                } else {
                    Some(Scalar::Float(self.to_f64().sqrt()))
                }
            }
            Scalar::Float(x) => Some(Scalar::Float(x.sqrt())),
        }
    }

    /// Parse "3", "-3/2" or "1.5" (decimal point or exponent means float).
    pub fn parse(text: &str) -> Option<Scalar> {
        let t = text.trim();
        if t.is_empty() {
            return None;
        }
        if t.contains('.') || t.contains('e') || t.contains('E') {
            return t.parse::<f64>().ok().map(Scalar::Float);
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(Scalar::Exact(BigRational::new(n, d)));
        }
        t.parse::<BigInt>()
            .ok()
            .map(|n| Scalar::Exact(BigRational::from_integer(n)))
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl From<BigRational> for Scalar {
    fn from(r: BigRational) -> Self {
        Scalar::Exact(r)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a $op b),
                    (a, b) => Scalar::Float(a.to_f64() $op b.to_f64()),
                }
            }
        }
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(-r),
            Scalar::Float(x) => Scalar::Float(-x),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            (Scalar::Float(a), Scalar::Float(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Scalar {}

// Total order used for canonical term ordering: exact sorts before float,
// floats compare by total_cmp.
impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            (Scalar::Float(a), Scalar::Float(b)) => a.total_cmp(b),
            (Scalar::Exact(_), Scalar::Float(_)) => Ordering::Less,
            (Scalar::Float(_), Scalar::Exact(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Float(x) => {
                if x.fract() == 0.0 && x.abs() < 1e15 {
                    write!(f, "{:.1}", x)
                } else {
                    write!(f, "{}", x)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Scalar::rational(1, 3);
        let b = Scalar::rational(1, 6);
        let s = &a + &b;
        assert!(s.is_exact());
        assert_eq!(s, Scalar::rational(1, 2));
    }

    #[test]
    fn mixing_promotes_to_float() {
        let a = Scalar::rational(1, 2);
        let b = Scalar::float(0.5);
        let s = &a + &b;
        assert!(!s.is_exact());
        assert_eq!(s.to_f64(), 1.0);
    }

    #[test]
    fn parse_round_trip() {
        for text in ["3", "-3/2", "0", "7/5"] {
            let s = Scalar::parse(text).unwrap();
            assert_eq!(s.to_string(), text);
            assert!(s.is_exact());
        }
        assert!(!Scalar::parse("1.5").unwrap().is_exact());
        assert!(Scalar::parse("1/0").is_none());
        assert!(Scalar::parse("").is_none());
    }

    #[test]
    fn sqrt_modes() {
        assert_eq!(Scalar::rational(9, 4).sqrt().unwrap(), Scalar::rational(3, 2));
        assert!(!Scalar::from_int(2).sqrt().unwrap().is_exact());
        assert!(Scalar::from_int(-1).sqrt().is_none());
        assert_eq!(Scalar::zero().sqrt().unwrap(), Scalar::zero());
    }

    #[test]
    fn division_by_zero_is_none() {
        assert!(Scalar::one().checked_div(&Scalar::zero()).is_none());
        assert!(Scalar::one().checked_div(&Scalar::float(0.0)).is_none());
    }
}
