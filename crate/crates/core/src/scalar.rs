//! Numeric backends.
//!
//! Every algorithm that can run exactly is generic over [`Scalar`]. Two
//! backends are provided: [`Rational`] (arbitrary precision, used for finite
//! support laws and identity checks) and `f64` (used for heavy tails and root
//! finding).

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational number.
pub type Rational = BigRational;

/// Which arithmetic a result was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::Float => f.write_str("float"),
        }
    }
}

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    const BACKEND: Backend;

    fn from_int(n: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Converts a float; `None` for exact backends, which never absorb
    /// rounded values.
    fn from_f64_lossy(x: f64) -> Option<Self>;

    fn from_usize(n: usize) -> Self {
        Self::from_int(n as i64)
    }

    /// The value as a rational, for exact backends.
    fn as_rational(&self) -> Option<Rational> {
        None
    }

    fn powi(&self, k: usize) -> Self {
        num_traits::pow(self.clone(), k)
    }

    fn is_exact() -> bool {
        Self::BACKEND == Backend::Exact
    }

    /// First `len` coefficients of the product of two polynomials.
    fn convolve_truncated(a: &[Self], b: &[Self], len: usize) -> Vec<Self> {
        let mut out = vec![Self::zero(); len];
        let nz: Vec<(usize, &Self)> = b.iter().enumerate().filter(|(_, x)| !x.is_zero()).collect();
        for (i, x) in a.iter().enumerate().take(len) {
            if x.is_zero() {
                continue;
            }
            for &(j, y) in &nz {
                if i + j >= len {
                    break;
                }
                out[i + j] = out[i + j].clone() + x.clone() * y.clone();
            }
        }
        out
    }
}

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Float;

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64_lossy(x: f64) -> Option<Self> {
        Some(x)
    }

    fn convolve_truncated(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        let nz: Vec<(usize, f64)> = b
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, y)| y != 0.0)
            .collect();
        for (i, &x) in a.iter().enumerate().take(len) {
            if x == 0.0 {
                continue;
            }
            let row = &mut out[i..];
            for &(j, y) in &nz {
                match row.get_mut(j) {
                    Some(o) => *o += x * y,
                    None => break,
                }
            }
        }
        out
    }

    fn powi(&self, k: usize) -> Self {
        if k <= i32::MAX as usize {
            f64::powi(*self, k as i32)
        } else {
            f64::powf(*self, k as f64)
        }
    }
}

impl Scalar for Rational {
    const BACKEND: Backend = Backend::Exact;

    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn from_f64_lossy(_: f64) -> Option<Self> {
        None
    }

    /// Works on integer numerators over a common denominator, so that only
    /// `len` fractions are reduced.
    fn convolve_truncated(a: &[Rational], b: &[Rational], len: usize) -> Vec<Rational> {
        let (an, ad) = common_denominator(&a[..a.len().min(len)]);
        let (bn, bd) = common_denominator(&b[..b.len().min(len)]);
        let nz: Vec<(usize, &BigInt)> = bn.iter().enumerate().filter(|(_, y)| !y.is_zero()).collect();
        let mut acc = vec![BigInt::zero(); len];
        for (i, x) in an.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for &(j, y) in &nz {
                if i + j >= len {
                    break;
                }
                acc[i + j] += x * y;
            }
        }
        let den = ad * bd;
        acc.into_iter()
            .map(|n| {
                if n.is_zero() {
                    Rational::zero()
                } else {
                    BigRational::new(n, den.clone())
                }
            })
            .collect()
    }
}

fn common_denominator(xs: &[Rational]) -> (Vec<BigInt>, BigInt) {
    use num_integer::Integer;
    let mut den = BigInt::from(1);
    for x in xs {
        if !x.is_zero() && !x.denom().is_one() {
            den = den.lcm(x.denom());
        }
    }
    let nums = xs
        .iter()
        .map(|x| {
            if x.is_zero() {
                BigInt::zero()
            } else {
                x.numer() * (&den / x.denom())
            }
        })
        .collect();
    (nums, den)
}

/// Converts a big rational to the nearest-ish `f64`, also when numerator and
/// denominator individually overflow.
pub fn ratio_to_f64(r: &Rational) -> f64 {
    if let Some(x) = ToPrimitive::to_f64(r) {
        if x.is_finite() && (x != 0.0 || r.is_zero()) {
            return x;
        }
    }
    // Scale both parts down to a common bit length before dividing.
    let n = r.numer();
    let d = r.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let shift_n = (nb - 60).max(0);
    let shift_d = (db - 60).max(0);
    let n_small = (n >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d_small = (d >> shift_d as usize).to_f64().unwrap_or(1.0);
    n_small / d_small * 2f64.powi((shift_n - shift_d) as i32)
}

/// Parses "a/b", an integer, or a finite decimal string into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((a, b)) = s.split_once('/') {
        let a = parse_rational(a)?;
        let b = parse_rational(b)?;
        if b.is_zero() {
            return None;
        }
        return Some(a / b);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str_radix(&digits, 10).ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Some(if neg { -value } else { value })
}

/// Exact rational from a float (binary expansion, no rounding).
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    BigRational::from_f64(x)
}

/// Sum of a slice.
pub fn sum<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, x| acc + x.clone())
}

/// Formats a scalar for machine-readable output: "a/b" strings for rationals,
/// shortest round-trip decimal for floats.
pub fn to_json_value<T: Scalar>(x: &T) -> serde_json::Value {
    match T::BACKEND {
        Backend::Exact => serde_json::Value::String(x.to_string()),
        Backend::Float => serde_json::Number::from_f64(x.to_f64())
            .map(serde_json::Value::Number)
            .unwrap_or_else(|| serde_json::Value::String(x.to_f64().to_string())),
    }
}
