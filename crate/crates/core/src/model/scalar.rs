use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// A real number that remembers its exact rational form when it was written
/// as a fraction (`"3/4"`) or an integer in a model file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar {
    value: f64,
    exact: Option<Ratio<i64>>,
}

impl Scalar {
    pub fn float(value: f64) -> Self {
        Self { value, exact: None }
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        let r = Ratio::new(numer, denom);
        Self {
            value: *r.numer() as f64 / *r.denom() as f64,
            exact: Some(r),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Ratio<i64>> {
        self.exact
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::float(v)
    }
}

impl FromStr for Scalar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Ok(r) = t.parse::<Ratio<i64>>() {
            if *r.denom() == 0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            return Ok(Scalar::ratio(*r.numer(), *r.denom()));
        }
        t.parse::<f64>()
            .map(Scalar::float)
            .map_err(|_| format!("cannot parse `{s}` as a number or fraction"))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => write!(f, "{}", self.value),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.exact {
            Some(r) if *r.denom() != 1 => serializer.serialize_str(&self.to_string()),
            _ => serializer.serialize_f64(self.value),
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScalarVisitor;

        impl Visitor<'_> for ScalarVisitor {
            type Value = Scalar;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a fraction string such as \"3/4\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Scalar, E> {
                Ok(Scalar::ratio(v, 1))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Scalar, E> {
                i64::try_from(v)
                    .map(|v| Scalar::ratio(v, 1))
                    .or(Ok(Scalar::float(v as f64)))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Scalar, E> {
                Ok(Scalar::float(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Scalar, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(ScalarVisitor)
    }
}

/// Exact sum of products when every factor is rational and nothing overflows.
pub(crate) fn exact_dot(pairs: &[(Scalar, Scalar)]) -> Option<Ratio<i64>> {
    let mut acc = Ratio::new(0i64, 1);
    for (a, b) in pairs {
        let (a, b) = (a.exact()?, b.exact()?);
        let prod = checked_mul(a, b)?;
        acc = checked_add(acc, prod)?;
    }
    Some(acc)
}

pub(crate) fn exact_sum(xs: &[Scalar]) -> Option<Ratio<i64>> {
    let mut acc = Ratio::new(0i64, 1);
    for x in xs {
        acc = checked_add(acc, x.exact()?)?;
    }
    Some(acc)
}

fn checked_mul(a: Ratio<i64>, b: Ratio<i64>) -> Option<Ratio<i64>> {
    let n = a.numer().checked_mul(*b.numer())?;
    let d = a.denom().checked_mul(*b.denom())?;
    Some(Ratio::new(n, d))
}

fn checked_add(a: Ratio<i64>, b: Ratio<i64>) -> Option<Ratio<i64>> {
    let n = a
        .numer()
        .checked_mul(*b.denom())?
        .checked_add(b.numer().checked_mul(*a.denom())?)?;
    let d = a.denom().checked_mul(*b.denom())?;
    Some(Ratio::new(n, d))
}
