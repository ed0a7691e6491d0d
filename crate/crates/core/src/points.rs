//! Exact rational quantities: rubric point values and experiment fractions.
//!
//! Point totals are summed in rational arithmetic so that grades are
//! bit-stable across platforms. Fractions (split ratios, subsample rates)
//! use the same representation so that ceilings and largest-remainder
//! allocations never suffer from binary floating-point error
//! (`0.05 * 40` is exactly `2`).

use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?} (expected an integer, a decimal like 0.25, or n/d)")]
pub struct ParseRationalError(pub String);

/// Parses `"3"`, `"-0.25"`, `"4/5"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| err())?;
        let d: i64 = den.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(n, d));
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.len() > 15 {
        return Err(err());
    }
    let den = 10i64.pow(frac_part.len() as u32);
    let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| err())? };
    let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| err())? };
    let num = whole
        .checked_mul(den)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(err)?;
    let value = Ratio::new(num, den);
    Ok(if negative { -value } else { value })
}

/// Renders a rational the way [`parse_rational`] reads it back.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Converts a finite `f64` through its shortest round-trip decimal form.
pub fn rational_from_f64(value: f64) -> Result<Rational, ParseRationalError> {
    if !value.is_finite() {
        return Err(ParseRationalError(value.to_string()));
    }
    parse_rational(&format!("{value}"))
}

/// A non-negative (by corpus validation) point value in grade units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Points(pub Rational);

impl Points {
    pub const ZERO: Points = Points(Ratio::new_raw(0, 1));

    pub fn integer(n: i64) -> Self {
        Points(Ratio::from_integer(n))
    }

    pub fn is_negative(&self) -> bool {
        self.0 < Rational::zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `Some(n)` when the value is a whole number.
    pub fn as_integer(&self) -> Option<i64> {
        self.0.is_integer().then(|| self.0.to_integer())
    }
}

impl fmt::Display for Points {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl FromStr for Points {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s).map(Points)
    }
}

impl Add for Points {
    type Output = Points;

    fn add(self, rhs: Points) -> Points {
        Points(self.0 + rhs.0)
    }
}

impl Sum for Points {
    fn sum<I: Iterator<Item = Points>>(iter: I) -> Points {
        iter.fold(Points::ZERO, |acc, p| acc + p)
    }
}

impl<'a> Sum<&'a Points> for Points {
    fn sum<I: Iterator<Item = &'a Points>>(iter: I) -> Points {
        iter.copied().sum()
    }
}

/// Whole numbers serialize as JSON integers, everything else as `"n/d"`.
impl Serialize for Points {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_rational(&self.0, serializer)
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserialize_rational(deserializer).map(Points)
    }
}

pub fn serialize_rational<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
    if value.is_integer() {
        serializer.serialize_i64(value.to_integer())
    } else {
        serializer.serialize_str(&format_rational(value))
    }
}

pub fn deserialize_rational<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
    struct Visitor;

    impl de::Visitor<'_> for Visitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number or a rational string such as \"3/2\"")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Ratio::from_integer(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            i64::try_from(v)
                .map(Ratio::from_integer)
                .map_err(|_| E::custom(format!("integer {v} out of range")))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            rational_from_f64(v).map_err(E::custom)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse_rational(v).map_err(E::custom)
        }
    }

    deserializer.deserialize_any(Visitor)
}

/// serde `with` adapter for `Vec<Rational>` fields.
pub mod rational_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(values: &[Rational], serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&Points(*v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Rational>, D::Error> {
        let points: Vec<Points> = Vec::deserialize(deserializer)?;
        Ok(points.into_iter().map(|p| p.0).collect())
    }
}

/// serde `with` adapter for a single `Rational` field.
pub mod rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_rational(value, serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        deserialize_rational(deserializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_fraction_forms() {
        assert_eq!(parse_rational("0.8").unwrap(), Ratio::new(4, 5));
        assert_eq!(parse_rational("4/5").unwrap(), Ratio::new(4, 5));
        assert_eq!(parse_rational("3").unwrap(), Ratio::from_integer(3));
        assert_eq!(parse_rational("-0.25").unwrap(), Ratio::new(-1, 4));
        assert_eq!(parse_rational(".5").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_rational("2.50").unwrap(), Ratio::new(5, 2));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", ".", "1/0", "abc", "1.2.3", "1e-3", "--1"] {
            assert!(parse_rational(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn fraction_times_count_is_exact() {
        let f = parse_rational("0.05").unwrap();
        assert_eq!((f * Ratio::from_integer(40)).ceil().to_integer(), 2);
    }

    #[test]
    fn points_serialize_as_integer_or_string() {
        assert_eq!(serde_json::to_string(&Points::integer(3)).unwrap(), "3");
        assert_eq!(serde_json::to_string(&Points(Ratio::new(3, 2))).unwrap(), "\"3/2\"");
        let p: Points = serde_json::from_str("1.5").unwrap();
        assert_eq!(p, Points(Ratio::new(3, 2)));
        let p: Points = serde_json::from_str("\"7/4\"").unwrap();
        assert_eq!(p, Points(Ratio::new(7, 4)));
    }
}
