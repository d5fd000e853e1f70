//! Scalar used by the integral solver: an exact rational when every input is
//! representable as one, a double otherwise.
//!
//! Arithmetic on two exact operands stays exact until an `i128` overflow,
//! after which the result degrades to a double. Sign tests on exact values
//! are therefore exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Float, Signed, ToPrimitive, Zero};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, Copy)]
pub enum Value {
    Exact(Rational),
    Approx(f64),
}

impl Value {
    pub const ZERO: Value = Value::Exact(Ratio::new_raw(0, 1));

    pub fn int(v: i64) -> Self {
        Value::Exact(Rational::from_integer(v as i128))
    }

    pub fn ratio(numer: i128, denom: i128) -> Self {
        Value::Exact(Rational::new(numer, denom))
    }

    /// Exact when `x` is a dyadic rational whose numerator and denominator
    /// fit comfortably in `i128`; every integer-valued double qualifies.
    pub fn from_f64(x: f64) -> Self {
        match exact_ratio(x) {
            Some(r) => Value::Exact(r),
            None => Value::Approx(x),
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Value::Exact(r) => r.to_f64().unwrap_or_else(|| {
                *r.numer() as f64 / *r.denom() as f64
            }),
            Value::Approx(x) => x,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Value::Exact(_))
    }

    pub fn is_positive(self) -> bool {
        match self {
            Value::Exact(r) => r.is_positive(),
            Value::Approx(x) => x > 0.0,
        }
    }

    pub fn is_negative(self) -> bool {
        match self {
            Value::Exact(r) => r.is_negative(),
            Value::Approx(x) => x < 0.0,
        }
    }

    pub fn is_finite(self) -> bool {
        match self {
            Value::Exact(_) => true,
            Value::Approx(x) => x.is_finite(),
        }
    }

    /// Exact halving keeps exactness.
    pub fn half(self) -> Self {
        match self {
            Value::Exact(r) => match r.numer().checked_rem(2) {
                Some(0) => Value::Exact(Rational::new(r.numer() / 2, *r.denom())),
                _ => i128::checked_mul(*r.denom(), 2)
                    .map(|d| Value::Exact(Rational::new(*r.numer(), d)))
                    .unwrap_or(Value::Approx(self.to_f64() / 2.0)),
            },
            Value::Approx(x) => Value::Approx(x / 2.0),
        }
    }
}

fn exact_ratio(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(Rational::zero());
    }
    let (mut mantissa, mut exponent, sign) = Float::integer_decode(x);
    let tz = mantissa.trailing_zeros();
    mantissa >>= tz;
    exponent += tz as i16;
    let bits = 64 - mantissa.leading_zeros() as i32;
    let m = sign as i128 * mantissa as i128;
    if exponent >= 0 {
        if bits + exponent as i32 > 100 {
            return None;
        }
        Some(Rational::from_integer(m << exponent))
    } else {
        let shift = -(exponent as i32);
        if shift > 100 {
            return None;
        }
        Some(Rational::new_raw(m, 1i128 << shift))
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::int(v)
    }
}

impl From<Rational> for Value {
    fn from(r: Rational) -> Self {
        Value::Exact(r)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::from_f64(x)
    }
}

macro_rules! checked_op {
    ($trait:ident, $method:ident, $checked:ident, $op:tt) => {
        impl $trait for Value {
            type Output = Value;

            fn $method(self, rhs: Value) -> Value {
                match (self, rhs) {
                    (Value::Exact(a), Value::Exact(b)) => match a.$checked(&b) {
                        Some(r) => Value::Exact(r),
                        None => Value::Approx(self.to_f64() $op rhs.to_f64()),
                    },
                    _ => Value::Approx(self.to_f64() $op rhs.to_f64()),
                }
            }
        }
    };
}

checked_op!(Add, add, checked_add, +);
checked_op!(Sub, sub, checked_sub, -);
checked_op!(Mul, mul, checked_mul, *);

impl Neg for Value {
    type Output = Value;

    fn neg(self) -> Value {
        match self {
            Value::Exact(r) => Value::Exact(-r),
            Value::Approx(x) => Value::Approx(-x),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Value::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Value::Approx(x) => write!(f, "{x}"),
        }
    }
}
