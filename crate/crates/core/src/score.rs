//! Exact rational scores.
//!
//! Roll-up values are kept as exact rationals so that weighted means never
//! accumulate rounding error; quantization only happens when rendering.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact non-negative rational value. Serialized as `"p/q"` or `"p"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational `{0}`")]
pub struct ParseScoreError(pub String);

impl Score {
    pub fn zero() -> Self {
        Score(BigRational::zero())
    }

    pub fn one() -> Self {
        Score(BigRational::one())
    }

    pub fn from_int(v: i64) -> Self {
        Score(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn new(numer: i64, denom: i64) -> Self {
        Score(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_ratio(r: BigRational) -> Self {
        Score(r)
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Fixed two-decimal rendering, rounded half away from zero.
    pub fn to_decimal_string(&self, places: u32) -> String {
        let scale = BigInt::from(10u32).pow(places);
        let scaled = &self.0 * BigRational::from_integer(scale.clone());
        let rounded = scaled.round().to_integer();
        let (int, frac) = (&rounded / &scale, (&rounded % &scale).abs());
        if places == 0 {
            return int.to_string();
        }
        let sign = if rounded.is_negative() && int.is_zero() { "-" } else { "" };
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = places as usize)
    }

    /// Parses `"3"`, `"3/4"`, or a finite decimal such as `"0.75"` exactly.
    pub fn parse(text: &str) -> Result<Self, ParseScoreError> {
        let err = || ParseScoreError(text.to_string());
        let t = text.trim();
        if t.is_empty() {
            return Err(err());
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Score(BigRational::new(n, d)));
        }
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| err())? };
        let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
        let r = BigRational::new(numer, denom);
        Ok(Score(if neg { -r } else { r }))
    }
}

impl From<u8> for Score {
    fn from(v: u8) -> Self {
        Score::from_int(i64::from(v))
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Score {
    type Err = ParseScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Score::parse(s)
    }
}

impl std::ops::Add for &Score {
    type Output = Score;
    fn add(self, rhs: &Score) -> Score {
        Score(&self.0 + &rhs.0)
    }
}

impl std::ops::Mul for &Score {
    type Output = Score;
    fn mul(self, rhs: &Score) -> Score {
        Score(&self.0 * &rhs.0)
    }
}

impl std::ops::Div for &Score {
    type Output = Score;
    fn div(self, rhs: &Score) -> Score {
        Score(&self.0 / &rhs.0)
    }
}

impl std::iter::Sum for Score {
    fn sum<I: Iterator<Item = Score>>(iter: I) -> Score {
        iter.fold(Score::zero(), |acc, s| &acc + &s)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => Score::parse(&s).map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(Score::from_int(i)),
            // Shortest round-trip formatting recovers the literal the author wrote.
            Raw::Float(f) if f.is_finite() => Score::parse(&format!("{f}")).map_err(serde::de::Error::custom),
            Raw::Float(f) => Err(serde::de::Error::custom(format!("non-finite score {f}"))),
        }
    }
}
