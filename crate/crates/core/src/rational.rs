//! Exact rational numbers and their text form.
//!
//! Values are written as exact decimals when the denominator only has the
//! prime factors 2 and 5 (`2.25`, `9`), and as `p/q` otherwise (`11/9`).
//! Parsing accepts the same forms, plus decimals with up to six fractional
//! digits, and never goes through binary floating point.

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{DofError, Result};

pub type Rational = num_rational::Ratio<i64>;

const MAX_FRACTION_DIGITS: usize = 6;

pub fn int(value: i64) -> Rational {
    Rational::from_integer(value)
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(numer, denom)
}

pub fn parse_rational(text: &str) -> Result<Rational> {
    let err = || DofError::Parse(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| err())?;
        let q: i64 = q.trim().parse().map_err(|_| err())?;
        if q == 0 {
            return Err(err());
        }
        return Ok(Rational::new(p, q));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if (whole.is_empty() && frac.is_empty())
        || frac.len() > MAX_FRACTION_DIGITS
        || !whole.chars().all(|c| c.is_ascii_digit())
        || !frac.chars().all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let numer: i64 = digits.parse().map_err(|_| err())?;
    let denom = 10i64.pow(frac.len() as u32);
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    let mut denom = *value.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while denom % 2 == 0 {
        denom /= 2;
        twos += 1;
    }
    while denom % 5 == 0 {
        denom /= 5;
        fives += 1;
    }
    let digits = twos.max(fives);
    if denom != 1 || digits as usize > MAX_FRACTION_DIGITS {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let scaled = value * int(10i64.pow(digits));
    debug_assert!(scaled.is_integer());
    let n = scaled.numer().abs();
    let unit = 10i64.pow(digits);
    let (whole, frac) = n.div_rem(&unit);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{whole}.{frac:0width$}", width = digits as usize)
}

pub fn to_f64(value: &Rational) -> f64 {
    value.numer().to_f64().unwrap_or(f64::NAN) / value.denom().to_f64().unwrap_or(f64::NAN)
}

/// Least common multiple of the denominators, i.e. the smallest positive
/// integer that makes every value integral.
pub fn common_scale(values: &[Rational]) -> i64 {
    values.iter().fold(1i64, |acc, v| acc.lcm(v.denom()))
}

/// Convert a value to an integer if it is one and is non-negative.
pub fn to_count(value: &Rational) -> Option<u64> {
    if value.is_integer() && !value.is_negative() {
        value.numer().to_u64()
    } else {
        None
    }
}

/// Smallest integer not below `value`.
pub fn ceil_nonneg(value: &Rational) -> u64 {
    if value.is_negative() || value.is_zero() {
        return 0;
    }
    value.ceil().numer().to_u64().unwrap_or(u64::MAX)
}

/// `serde(with = ...)` adapter storing a rational in its text form.
pub mod serde_text {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(D::Error::custom)
    }
}

/// Same as [`serde_text`] for fixed-size triples.
pub mod serde_triple {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &[Rational; 3], s: S) -> Result<S::Ok, S::Error> {
        value.map(|v| format_rational(&v)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Rational; 3], D::Error> {
        let text = <[String; 3]>::deserialize(d)?;
        let mut out = [Rational::from_integer(0); 3];
        for (slot, t) in out.iter_mut().zip(text.iter()) {
            *slot = parse_rational(t).map_err(D::Error::custom)?;
        }
        Ok(out)
    }
}
