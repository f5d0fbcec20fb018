//! Exact rational scalars.

use alloc::string::{String, ToString};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Arbitrary-precision rational. Every measure, probability and expectation
/// in this crate is one of these.
pub type Rat = num_rational::BigRational;

/// `n` as a rational.
pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `n / d` as a rational. Panics if `d == 0`.
pub fn frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

/// Renders as `num/den` (or just `num` when the denominator is 1), the
/// format used by all file interchange.
pub fn format(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        let mut s = r.numer().to_string();
        s.push('/');
        s.push_str(&r.denom().to_string());
        s
    }
}

/// Parses `num`, `num/den` or a decimal like `0.25`.
pub fn parse(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Some((whole, fract)) = s.split_once('.') {
        let neg = whole.trim_start().starts_with('-');
        let w: BigInt = whole.parse().ok()?;
        if fract.is_empty() || !fract.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let f: BigInt = fract.parse().ok()?;
        let scale = BigInt::from(10u32).pow(fract.len() as u32);
        let abs = Rat::new(w.abs() * &scale + f, scale);
        return Some(if neg { -abs } else { abs });
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rat::from_integer(n))
}

/// Absolute value.
pub fn abs(r: &Rat) -> Rat {
    if r.is_negative() {
        -r.clone()
    } else {
        r.clone()
    }
}
