//! JSON form of a law:
//!
//! ```json
//! {"pmf": {"0": "1/2", "2": "1/2"}, "tail": null, "radius": "inf"}
//! ```
//!
//! A law whose masses are all strings and which has no tail is read exactly;
//! anything else is read as floats.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{OffspringLaw, Tail};
use crate::error::{Error, Result};
use crate::scalar::{parse_rational, ratio_to_f64, to_json_value, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawDescriptor {
    pub pmf: BTreeMap<String, Value>,
    #[serde(default)]
    pub tail: Option<TailDescriptor>,
    #[serde(default)]
    pub radius: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TailDescriptor {
    Power {
        #[serde(default)]
        coeff: Option<Value>,
        exponent: f64,
        #[serde(default)]
        ratio: Option<Value>,
        from: usize,
    },
    Geometric {
        #[serde(default)]
        coeff: Option<Value>,
        ratio: Value,
        from: usize,
    },
}

/// A law in whichever backend its descriptor called for.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyLaw {
    Exact(OffspringLaw<Rational>),
    Float(OffspringLaw<f64>),
}

impl AnyLaw {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let d: LawDescriptor =
            serde_json::from_str(s).map_err(|e| Error::InvalidLaw(format!("bad JSON: {e}")))?;
        Self::from_descriptor(&d)
    }

    pub fn from_descriptor(d: &LawDescriptor) -> Result<Self> {
        let mut entries: Vec<(usize, &Value)> = Vec::with_capacity(d.pmf.len());
        for (k, v) in &d.pmf {
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::InvalidLaw(format!("pmf key {k:?} is not a degree")))?;
            entries.push((k, v));
        }
        let len = entries.iter().map(|(k, _)| k + 1).max().unwrap_or(0);
        let exact = d.tail.is_none() && entries.iter().all(|(_, v)| v.is_string());
        let law = if exact {
            let mut head = vec![Rational::from_int(0); len];
            for (k, v) in entries {
                head[k] = value_to_rational(v)?;
            }
            AnyLaw::Exact(OffspringLaw::from_pmf(head)?)
        } else {
            let mut head = vec![0.0; len];
            for (k, v) in &entries {
                head[*k] = value_to_f64(v)?;
            }
            match &d.tail {
                None => AnyLaw::Float(OffspringLaw::from_pmf(head)?),
                Some(t) => {
                    let (coeff, exponent, ratio, from) = match t {
                        TailDescriptor::Power {
                            coeff,
                            exponent,
                            ratio,
                            from,
                        } => (coeff, *exponent, ratio.as_ref().map(value_to_f64).transpose()?, *from),
                        TailDescriptor::Geometric { coeff, ratio, from } => {
                            (coeff, 0.0, Some(value_to_f64(ratio)?), *from)
                        }
                    };
                    if len > from {
                        return Err(Error::InvalidLaw(format!(
                            "pmf entry at {} overlaps the tail starting at {from}",
                            len - 1
                        )));
                    }
                    head.resize(from, 0.0);
                    let coeff = coeff.as_ref().map(value_to_f64).transpose()?;
                    AnyLaw::Float(OffspringLaw::with_tail(
                        head,
                        coeff,
                        exponent,
                        ratio.unwrap_or(1.0),
                    )?)
                }
            }
        };
        if let Some(r) = &d.radius {
            let declared = match r {
                Value::String(s) if s == "inf" || s == "infinity" => f64::INFINITY,
                other => value_to_f64(other)?,
            };
            let actual = law.radius();
            let ok = if actual.is_infinite() {
                declared.is_infinite()
            } else {
                (declared - actual).abs() <= 1e-9 * actual
            };
            if !ok {
                return Err(Error::InvalidLaw(format!(
                    "declared radius {declared} disagrees with the tail (radius {actual})"
                )));
            }
        }
        Ok(law)
    }

    pub fn radius(&self) -> f64 {
        match self {
            AnyLaw::Exact(l) => l.radius(),
            AnyLaw::Float(l) => l.radius(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, AnyLaw::Exact(_))
    }

    pub fn to_f64_law(&self) -> OffspringLaw<f64> {
        match self {
            AnyLaw::Exact(l) => l.to_f64_law(),
            AnyLaw::Float(l) => l.clone(),
        }
    }

    pub fn to_descriptor(&self) -> LawDescriptor {
        match self {
            AnyLaw::Exact(l) => l.to_descriptor(),
            AnyLaw::Float(l) => l.to_descriptor(),
        }
    }
}

impl<T: Scalar> OffspringLaw<T> {
    pub fn to_descriptor(&self) -> LawDescriptor {
        let pmf = self
            .head()
            .iter()
            .enumerate()
            .filter(|(_, p)| !num_traits::Zero::is_zero(*p))
            .map(|(k, p)| (k.to_string(), to_json_value(p)))
            .collect();
        let tail = self.tail().map(|t: &Tail| TailDescriptor::Power {
            coeff: Some(float_value(t.coeff)),
            exponent: t.exponent,
            ratio: Some(float_value(t.ratio)),
            from: self.head().len(),
        });
        let radius = self.radius();
        LawDescriptor {
            pmf,
            tail,
            radius: Some(if radius.is_infinite() {
                Value::String("inf".into())
            } else {
                float_value(radius)
            }),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self.to_descriptor()).expect("descriptor serializes")
    }
}

fn float_value(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(x.to_string()))
}

fn value_to_rational(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => {
            parse_rational(s).ok_or_else(|| Error::InvalidLaw(format!("cannot parse {s:?}")))
        }
        other => Err(Error::InvalidLaw(format!("expected a string, got {other}"))),
    }
}

fn value_to_f64(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| Error::InvalidLaw(format!("bad number {n}"))),
        Value::String(s) => parse_rational(s)
            .map(|r| ratio_to_f64(&r))
            .or_else(|| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidLaw(format!("cannot parse {s:?}"))),
        other => Err(Error::InvalidLaw(format!("expected a number, got {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_descriptor_round_trip() {
        let law = AnyLaw::from_json_str(r#"{"pmf": {"0": "1/2", "2": "0.5"}, "tail": null, "radius": "inf"}"#)
            .unwrap();
        assert!(law.is_exact());
        let again = AnyLaw::from_descriptor(&law.to_descriptor()).unwrap();
        assert_eq!(law, again);
    }

    #[test]
    fn power_tail_descriptor() {
        let law = AnyLaw::from_json_str(
            r#"{"pmf": {"0": 0.5}, "tail": {"type": "power", "exponent": 3.0, "from": 1}, "radius": 1}"#,
        )
        .unwrap();
        let AnyLaw::Float(p) = &law else { panic!() };
        assert!((p.pmf(1) - 0.5 / 1.202_056_903_159_594_2).abs() < 1e-15);
        let again = AnyLaw::from_descriptor(&law.to_descriptor()).unwrap();
        let AnyLaw::Float(q) = again else { panic!() };
        assert!((q.pmf(7) - p.pmf(7)).abs() < 1e-18);
    }

    #[test]
    fn geometric_tail_and_radius_check() {
        let ok = r#"{"pmf": {"0": 0.5}, "tail": {"type": "geometric", "ratio": "1/2", "from": 1}, "radius": 2}"#;
        let law = AnyLaw::from_json_str(ok).unwrap();
        assert_eq!(law.radius(), 2.0);
        // p(k) = 2^{-(k+1)}
        assert!((law.to_f64_law().pmf(3) - 1.0 / 16.0).abs() < 1e-15);
        let bad = r#"{"pmf": {"0": 0.5}, "tail": {"type": "geometric", "ratio": 0.5, "from": 1}, "radius": "inf"}"#;
        assert!(AnyLaw::from_json_str(bad).is_err());
        assert!(AnyLaw::from_json_str(r#"{"pmf": {"x": "1"}}"#).is_err());
    }
}
