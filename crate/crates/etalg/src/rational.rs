//! Exact rational scalars.
//!
//! Every coordinate, endpoint, eigenvalue and tolerance in this crate is a
//! `BigRational`; floating point only appears in the numerical unitary
//! bridge.  This module adds the handful of conveniences the rest of the
//! crate leans on: short constructors, canonical `"num/den"` text round-trips
//! for JSON, and exact floor/ceil division helpers used when picking grid
//! resolutions.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

/// `n/d` as an exact rational. Panics on `d == 0`; intended for literals.
pub fn q(n: i64, d: i64) -> Q {
    assert!(d != 0, "rational literal with zero denominator");
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as a rational.
pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn q_zero() -> Q {
    Q::zero()
}

pub fn q_one() -> Q {
    Q::one()
}

/// Canonical text form `num/den` with positive denominator and reduced terms.
/// Integers still print with an explicit `/1` so the grammar stays uniform.
pub fn q_to_string(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parse `"num/den"` or a bare integer `"num"`.
pub fn q_from_str(s: &str) -> Result<Q> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| Error::schema(format!("bad rational numerator in {s:?}")))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| Error::schema(format!("bad rational denominator in {s:?}")))?;
    if den.is_zero() {
        return Err(Error::schema(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(num, den))
}

/// Smallest integer `m` with `m > x` (exact).
pub fn strictly_above(x: &Q) -> BigInt {
    let fl = x.floor().to_integer();
    fl + 1
}

/// Smallest integer `m` with `m >= x` (exact ceiling).
pub fn at_least(x: &Q) -> BigInt {
    x.ceil().to_integer()
}

/// Midpoint of two rationals.
pub fn midpoint(a: &Q, b: &Q) -> Q {
    (a + b) / qi(2)
}

/// `|a - b|`.
pub fn absdiff(a: &Q, b: &Q) -> Q {
    (a - b).abs()
}

/// Best-effort `f64` image (used only by the numerical bridge and reports).
pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Fall back to a quotient of lossy conversions for extreme values.
        let n = x.numer().to_f64().unwrap_or(f64::MAX);
        let d = x.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Serde adaptor: (de)serializes a `Q` as its canonical `"num/den"` string.
pub mod serde_q {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&q_to_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        q_from_str(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_canonical_text() {
        let x = q(-6, 8);
        assert_eq!(q_to_string(&x), "-3/4");
        assert_eq!(q_from_str("-3/4").unwrap(), x);
        assert_eq!(q_from_str("7").unwrap(), qi(7));
        assert_eq!(q_from_str(" 2 / 6 ").unwrap(), q(1, 3));
    }

    #[test]
    fn rejects_zero_denominator() {
        assert!(q_from_str("1/0").is_err());
        assert!(q_from_str("x/2").is_err());
    }

    #[test]
    fn integer_thresholds() {
        assert_eq!(strictly_above(&q(8, 1)), BigInt::from(9));
        assert_eq!(strictly_above(&q(17, 2)), BigInt::from(9));
        assert_eq!(at_least(&q(8, 1)), BigInt::from(8));
        assert_eq!(at_least(&q(17, 2)), BigInt::from(9));
    }
}
