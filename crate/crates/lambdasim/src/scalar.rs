//! Exact arithmetic over the rationals and the ordered quadratic extension
//! containing sqrt(2).
//!
//! All polytope geometry in this crate is carried out in this field, so
//! membership tests and decompositions are exact. Floating point appears in
//! exactly two places: converting a probability for the pseudo-random draw,
//! and report output.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational scalar. Always stored in lowest terms with a positive
/// denominator (guaranteed by `num_rational`).
pub type Rational = BigRational;

/// Convenience constructor for small rationals.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// An element `a + b*sqrt(2)` of the real quadratic field Q(sqrt 2).
///
/// Equality is component-wise; the representation is unique because sqrt(2)
/// is irrational.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QSqrt2 {
    pub a: Rational,
    pub b: Rational,
}

impl QSqrt2 {
    pub fn new(a: Rational, b: Rational) -> Self {
        QSqrt2 { a, b }
    }

    pub fn from_rational(a: Rational) -> Self {
        QSqrt2 { a, b: Rational::zero() }
    }

    pub fn from_int(v: i64) -> Self {
        Self::from_rational(Rational::from(BigInt::from(v)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(ratio(num, den))
    }

    /// `sqrt(2)` times a rational coefficient.
    pub fn sqrt2_times(b: Rational) -> Self {
        QSqrt2 { a: Rational::zero(), b }
    }

    pub fn zero() -> Self {
        QSqrt2 { a: Rational::zero(), b: Rational::zero() }
    }

    pub fn one() -> Self {
        QSqrt2 { a: Rational::one(), b: Rational::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// The rational part, failing if a sqrt(2) component is present.
    pub fn as_rational(&self) -> Result<&Rational> {
        if self.b.is_zero() {
            Ok(&self.a)
        } else {
            Err(Error::Internal(format!("expected rational value, got {self}")))
        }
    }

    /// Exact sign of the represented real number: -1, 0, or +1.
    ///
    /// When the two parts disagree in sign, compare `a^2` against `2 b^2`;
    /// the dominant part determines the sign. `a^2 = 2 b^2` is impossible
    /// for nonzero rationals since sqrt(2) is irrational.
    pub fn sign(&self) -> i8 {
        let sa = rational_sign(&self.a);
        let sb = rational_sign(&self.b);
        if sb == 0 {
            return sa;
        }
        if sa == 0 {
            return sb;
        }
        if sa == sb {
            return sa;
        }
        let a2 = &self.a * &self.a;
        let b2_twice = &self.b * &self.b * Rational::from(BigInt::from(2));
        match a2.cmp(&b2_twice) {
            std::cmp::Ordering::Greater => sa,
            std::cmp::Ordering::Less => sb,
            std::cmp::Ordering::Equal => unreachable!("a^2 = 2 b^2 with a, b nonzero rationals"),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign() > 0
    }

    pub fn is_negative(&self) -> bool {
        self.sign() < 0
    }

    /// Multiplicative inverse. Fails on zero.
    pub fn inv(&self) -> Result<QSqrt2> {
        if self.is_zero() {
            return Err(Error::Domain("division by zero in Q(sqrt2)".into()));
        }
        // 1/(a + b sqrt2) = (a - b sqrt2) / (a^2 - 2 b^2)
        let denom = &self.a * &self.a - &self.b * &self.b * Rational::from(BigInt::from(2));
        debug_assert!(!denom.is_zero());
        Ok(QSqrt2 { a: &self.a / &denom, b: -(&self.b / &denom) })
    }

    pub fn checked_div(&self, rhs: &QSqrt2) -> Result<QSqrt2> {
        Ok(self * &rhs.inv()?)
    }

    /// Convert to binary64 with relative error below 2^-50.
    ///
    /// sqrt(2) is replaced by integer bounds at increasing precision until the
    /// rounded values of the lower and upper bound agree.
    pub fn to_f64(&self) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        if self.b.is_zero() {
            return rational_to_f64(&self.a);
        }
        let two = BigInt::from(2);
        let mut bits = 128u64;
        loop {
            // floor(sqrt(2) * 2^bits) via integer square root of 2 * 4^bits
            let lo_num = (&two << (2 * bits)).sqrt();
            let hi_num = &lo_num + 1;
            let scale = BigInt::one() << bits;
            let s_lo = Rational::new(lo_num, scale.clone());
            let s_hi = Rational::new(hi_num, scale);
            let (lo, hi) = if self.b.is_negative() {
                (&self.a + &self.b * &s_hi, &self.a + &self.b * &s_lo)
            } else {
                (&self.a + &self.b * &s_lo, &self.a + &self.b * &s_hi)
            };
            let f_lo = rational_to_f64(&lo)?;
            let f_hi = rational_to_f64(&hi)?;
            if f_lo == f_hi {
                return Ok(f_lo);
            }
            bits *= 2;
            if bits > 8192 {
                // Bounds straddle a representable value; either is within 1 ulp.
                return Ok(f_lo);
            }
        }
    }
}

fn rational_sign(r: &Rational) -> i8 {
    if r.is_zero() {
        0
    } else if r.is_negative() {
        -1
    } else {
        1
    }
}

/// Round an exact rational to the nearest binary64 (ties to even).
///
/// Signals a range error on overflow. Values that underflow to subnormals are
/// returned denormalized, which is more precision than any caller needs here.
pub fn rational_to_f64(r: &Rational) -> Result<f64> {
    let num = r.numer();
    let den = r.denom();
    if num.is_zero() {
        return Ok(0.0);
    }
    let negative = num.sign() == Sign::Minus;
    let num_abs = num.abs();
    // Scale so the integer quotient q = floor(num * 2^shift / den) has exactly
    // 53 bits, i.e. q in [2^52, 2^53). The bit-length estimate can be off by
    // one, so iterate until the width is right.
    let mut shift = 53 - (num_abs.bits() as i64 - den.bits() as i64);
    loop {
        let (scaled_num, scaled_den) = if shift >= 0 {
            (&num_abs << shift as u64, den.clone())
        } else {
            (num_abs.clone(), den << (-shift) as u64)
        };
        let (q, rem) = scaled_num.div_rem(&scaled_den);
        let qbits = q.bits() as i64;
        if qbits != 53 {
            shift += 53 - qbits;
            continue;
        }
        // Round to nearest, ties to even.
        let mut q = q;
        let twice_rem = &rem << 1u32;
        match twice_rem.cmp(&scaled_den) {
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                if q.is_odd() {
                    q += 1;
                }
            }
            std::cmp::Ordering::Less => {}
        }
        let mantissa = q.to_u64().ok_or_else(|| Error::Internal("mantissa overflow".into()))?;
        let scale = exp2i(-shift);
        if scale.is_infinite() {
            return Err(Error::Range("rational overflows binary64".into()));
        }
        let value = mantissa as f64 * scale;
        if value.is_infinite() {
            return Err(Error::Range("rational overflows binary64".into()));
        }
        return Ok(if negative { -value } else { value });
    }
}

/// Exact power of two as f64 where representable; infinity above the range,
/// zero below the subnormals.
fn exp2i(e: i64) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074) as u64)
    } else {
        0.0
    }
}

impl fmt::Display for QSqrt2 {
    /// Canonical rendering `p/q + r/s*sqrt2` used in all JSON output.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} + {}/{}*sqrt2",
            self.a.numer(),
            self.a.denom(),
            self.b.numer(),
            self.b.denom()
        )
    }
}

impl fmt::Debug for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for QSqrt2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<QSqrt2> {
        let parts: Vec<&str> = s.split('+').collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("malformed Q(sqrt2) literal: {s:?}")));
        }
        let a = parse_fraction(parts[0].trim())?;
        let bpart = parts[1].trim();
        let b = match bpart.strip_suffix("*sqrt2") {
            Some(frac) => parse_fraction(frac.trim())?,
            None => return Err(Error::Parse(format!("missing sqrt2 factor in {s:?}"))),
        };
        Ok(QSqrt2::new(a, b))
    }
}

fn parse_fraction(s: &str) -> Result<Rational> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n = BigInt::from_str(num.trim())
        .map_err(|e| Error::Parse(format!("bad numerator {num:?}: {e}")))?;
    let d = BigInt::from_str(den.trim())
        .map_err(|e| Error::Parse(format!("bad denominator {den:?}: {e}")))?;
    if d.is_zero() {
        return Err(Error::Parse("zero denominator".into()));
    }
    Ok(Rational::new(n, d))
}

impl Serialize for QSqrt2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for QSqrt2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, |$lhs:ident, $rhs:ident| $body:expr) => {
        impl<'a, 'b> $trait<&'b QSqrt2> for &'a QSqrt2 {
            type Output = QSqrt2;
            fn $method(self, other: &'b QSqrt2) -> QSqrt2 {
                let $lhs = self;
                let $rhs = other;
                $body
            }
        }
        impl $trait<QSqrt2> for QSqrt2 {
            type Output = QSqrt2;
            fn $method(self, other: QSqrt2) -> QSqrt2 {
                (&self).$method(&other)
            }
        }
        impl<'b> $trait<&'b QSqrt2> for QSqrt2 {
            type Output = QSqrt2;
            fn $method(self, other: &'b QSqrt2) -> QSqrt2 {
                (&self).$method(other)
            }
        }
    };
}

forward_binop!(Add, add, |x, y| QSqrt2 { a: &x.a + &y.a, b: &x.b + &y.b });
forward_binop!(Sub, sub, |x, y| QSqrt2 { a: &x.a - &y.a, b: &x.b - &y.b });
forward_binop!(Mul, mul, |x, y| {
    // (a1 + b1 s)(a2 + b2 s) = (a1 a2 + 2 b1 b2) + (a1 b2 + a2 b1) s
    if x.b.is_zero() && y.b.is_zero() {
        QSqrt2 { a: &x.a * &y.a, b: Rational::zero() }
    } else {
        QSqrt2 {
            a: &x.a * &y.a + Rational::from(BigInt::from(2)) * (&x.b * &y.b),
            b: &x.a * &y.b + &x.b * &y.a,
        }
    }
});

impl Div<&QSqrt2> for &QSqrt2 {
    type Output = QSqrt2;
    /// Panics on division by zero; use `checked_div` where the divisor is not
    /// known to be nonzero.
    fn div(self, rhs: &QSqrt2) -> QSqrt2 {
        self.checked_div(rhs).expect("division by zero in Q(sqrt2)")
    }
}

impl Neg for &QSqrt2 {
    type Output = QSqrt2;
    fn neg(self) -> QSqrt2 {
        QSqrt2 { a: -self.a.clone(), b: -self.b.clone() }
    }
}

impl Neg for QSqrt2 {
    type Output = QSqrt2;
    fn neg(self) -> QSqrt2 {
        QSqrt2 { a: -self.a, b: -self.b }
    }
}

impl AddAssign<&QSqrt2> for QSqrt2 {
    fn add_assign(&mut self, rhs: &QSqrt2) {
        self.a += &rhs.a;
        self.b += &rhs.b;
    }
}

impl SubAssign<&QSqrt2> for QSqrt2 {
    fn sub_assign(&mut self, rhs: &QSqrt2) {
        self.a -= &rhs.a;
        self.b -= &rhs.b;
    }
}
