use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

/// A nonnegative real or positive infinity.
///
/// Serialized as a JSON number, or as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    /// `1 / x`, infinite when `x == 0`.
    pub fn recip(x: f64) -> Self {
        if x == 0.0 {
            Extended::Infinite
        } else {
            Extended::Finite(1.0 / x)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Extended::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Extended::Finite(x) => Some(x),
            Extended::Infinite => None,
        }
    }

    /// Lossy conversion for arithmetic (`Infinite` maps to `f64::INFINITY`).
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

/// A real number or a signed infinity, used for differences of [`Extended`] values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignedExtended {
    Finite(f64),
    PosInfinite,
    NegInfinite,
}

impl SignedExtended {
    /// `after - before`; two infinities cancel to zero.
    pub fn difference(after: Extended, before: Extended) -> Self {
        match (after, before) {
            (Extended::Finite(a), Extended::Finite(b)) => SignedExtended::Finite(a - b),
            (Extended::Infinite, Extended::Finite(_)) => SignedExtended::PosInfinite,
            (Extended::Finite(_), Extended::Infinite) => SignedExtended::NegInfinite,
            (Extended::Infinite, Extended::Infinite) => SignedExtended::Finite(0.0),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            SignedExtended::Finite(x) => x,
            SignedExtended::PosInfinite => f64::INFINITY,
            SignedExtended::NegInfinite => f64::NEG_INFINITY,
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Extended::Finite(x) => s.serialize_f64(x),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

impl Serialize for SignedExtended {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            SignedExtended::Finite(x) => s.serialize_f64(x),
            SignedExtended::PosInfinite => s.serialize_str("inf"),
            SignedExtended::NegInfinite => s.serialize_str("-inf"),
        }
    }
}

struct ExtendedVisitor;

impl<'de> Visitor<'de> for ExtendedVisitor {
    type Value = Extended;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or the string \"inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Extended, E> {
        Ok(Extended::Finite(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Extended, E> {
        Ok(Extended::Finite(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Extended, E> {
        Ok(Extended::Finite(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Extended, E> {
        if v == "inf" {
            Ok(Extended::Infinite)
        } else {
            Err(E::invalid_value(de::Unexpected::Str(v), &self))
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(ExtendedVisitor)
    }
}
