//! Runtime values and program states.

use std::cmp::Ordering;
use std::fmt;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Expr, Type, TypeEnv};

/// An exact value. Rationals are kept in lowest terms with a positive
/// denominator (guaranteed by `BigRational`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Int(BigInt),
    Rat(BigRational),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("`{text}` is not a valid {ty} value")]
    Malformed { text: String, ty: Type },
    #[error("{ty} value must be non-negative, got {value}")]
    Negative { ty: Type, value: String },
    #[error("missing value for `{0}`")]
    Missing(String),
    #[error("unknown variable `{0}`")]
    Unknown(String),
}

impl Value {
    pub fn default_for(ty: Type) -> Value {
        match ty {
            Type::Boolean => Value::Bool(false),
            Type::Natural | Type::Integer => Value::Int(BigInt::zero()),
            Type::Rational => Value::Rat(BigRational::zero()),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    /// The literal expression denoting this value.
    pub fn to_expr(&self) -> Expr {
        match self {
            Value::Bool(b) => Expr::Bool(*b),
            Value::Int(v) => Expr::Int(v.clone()),
            Value::Rat(v) => Expr::Rat(v.clone()),
        }
    }

    /// Numeric view; integers embed exactly.
    pub fn to_rational(&self) -> Option<BigRational> {
        match self {
            Value::Int(v) => Some(BigRational::from_integer(v.clone())),
            Value::Rat(v) => Some(v.clone()),
            Value::Bool(_) => None,
        }
    }

    /// Numeric comparison across the Int/Rat split.
    pub fn numeric_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            _ => Some(self.to_rational()?.cmp(&other.to_rational()?)),
        }
    }

    /// Converts to the representation used for variables of type `ty`,
    /// checking the value's kind and sign.
    pub fn conform(self, ty: Type) -> Result<Value, ValueError> {
        let malformed = |v: &Value| ValueError::Malformed {
            text: v.to_string(),
            ty,
        };
        match (ty, self) {
            (Type::Boolean, v @ Value::Bool(_)) => Ok(v),
            (Type::Integer, v @ Value::Int(_)) => Ok(v),
            (Type::Natural, Value::Int(v)) if v.is_negative() => Err(ValueError::Negative {
                ty,
                value: v.to_string(),
            }),
            (Type::Natural, v @ Value::Int(_)) => Ok(v),
            (Type::Natural | Type::Integer, Value::Rat(r)) if r.is_integer() => {
                Value::Int(r.to_integer()).conform(ty)
            }
            (Type::Rational, Value::Int(v)) => Ok(Value::Rat(BigRational::from_integer(v))),
            (Type::Rational, v @ Value::Rat(_)) => Ok(v),
            (_, v) => Err(malformed(&v)),
        }
    }

    /// Parses the wire form of a value of type `ty`: `true`/`false`, decimal
    /// integers, or `num/den` rationals.
    pub fn parse(text: &str, ty: Type) -> Result<Value, ValueError> {
        let t = text.trim();
        let malformed = || ValueError::Malformed {
            text: text.to_string(),
            ty,
        };
        let v = match ty {
            Type::Boolean => match t {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                _ => return Err(malformed()),
            },
            _ => {
                let v = if let Some((n, d)) = t.split_once('/') {
                    let n: BigInt = n.trim().parse().map_err(|_| malformed())?;
                    let d: BigInt = d.trim().parse().map_err(|_| malformed())?;
                    if d.is_zero() {
                        return Err(malformed());
                    }
                    Value::Rat(BigRational::new(n, d))
                } else {
                    Value::Int(t.parse().map_err(|_| malformed())?)
                };
                return v.conform(ty).map_err(|e| match e {
                    ValueError::Malformed { .. } => malformed(),
                    other => other,
                });
            }
        };
        Ok(v)
    }

    /// Parses a JSON value (bool, integer number, or string wire form).
    pub fn from_json(v: &serde_json::Value, ty: Type) -> Result<Value, ValueError> {
        match v {
            serde_json::Value::Bool(b) => Value::parse(if *b { "true" } else { "false" }, ty),
            serde_json::Value::Number(n) if n.is_i64() || n.is_u64() => {
                Value::parse(&n.to_string(), ty)
            }
            serde_json::Value::String(s) => Value::parse(s, ty),
            other => Err(ValueError::Malformed {
                text: other.to_string(),
                ty,
            }),
        }
    }

    /// Uniform sample: integers in [-100, 100] (naturals in [0, 100]);
    /// rationals with numerator and non-zero denominator in [-100, 100].
    pub fn sample<R: Rng + ?Sized>(ty: Type, rng: &mut R) -> Value {
        match ty {
            Type::Boolean => Value::Bool(rng.gen()),
            Type::Natural => Value::Int(BigInt::from(rng.gen_range(0..=100))),
            Type::Integer => Value::Int(BigInt::from(rng.gen_range(-100..=100))),
            Type::Rational => {
                let n = rng.gen_range(-100..=100);
                let mut d = 0;
                while d == 0 {
                    d = rng.gen_range(-100..=100);
                }
                Value::Rat(BigRational::new(n.into(), BigInt::from(d)))
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Rat(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Value::Rat(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bool(b) => s.serialize_bool(*b),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    /// Untyped decoding: strings with a `/` become rationals, other strings
    /// integers. Use [`State::conform`] to restore declared types.
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        let ty = match &raw {
            serde_json::Value::Bool(_) => Type::Boolean,
            serde_json::Value::String(s) if s.contains('/') => Type::Rational,
            _ => Type::Integer,
        };
        Value::from_json(&raw, ty).map_err(de::Error::custom)
    }
}

/// A valuation of program variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(IndexMap<String, Value>);

impl State {
    pub fn new() -> Self {
        State(IndexMap::new())
    }

    /// Every variable of `env` at its type default.
    pub fn defaults(env: &TypeEnv) -> Self {
        State(
            env.iter()
                .map(|(n, t)| (n.clone(), Value::default_for(*t)))
                .collect(),
        )
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, v: Value) {
        self.0.insert(name.into(), v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    /// Keeps only the named variables, in the given order.
    pub fn project<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> State {
        State(
            names
                .into_iter()
                .filter_map(|n| self.0.get(n).map(|v| (n.to_string(), v.clone())))
                .collect(),
        )
    }

    /// Re-types every entry against `env`, in `env` order; entries not in
    /// `env` are rejected and missing ones are an error.
    pub fn conform(&self, env: &TypeEnv) -> Result<State, ValueError> {
        if let Some(extra) = self.0.keys().find(|k| !env.contains_key(*k)) {
            return Err(ValueError::Unknown(extra.clone()));
        }
        env.iter()
            .map(|(n, t)| {
                let v = self
                    .0
                    .get(n)
                    .ok_or_else(|| ValueError::Missing(n.clone()))?;
                Ok((n.clone(), v.clone().conform(*t)?))
            })
            .collect::<Result<IndexMap<_, _>, _>>()
            .map(State)
    }

    /// Random type-conforming values for every variable in `env`.
    pub fn sample<R: Rng + ?Sized>(env: &TypeEnv, rng: &mut R) -> State {
        State(
            env.iter()
                .map(|(n, t)| (n.clone(), Value::sample(*t, rng)))
                .collect(),
        )
    }
}

impl FromIterator<(String, Value)> for State {
    fn from_iter<I: IntoIterator<Item = (String, Value)>>(iter: I) -> Self {
        State(iter.into_iter().collect())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (n, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}: {v}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wire_forms() {
        assert_eq!(
            Value::parse("-12", Type::Integer).unwrap(),
            Value::Int((-12).into())
        );
        assert_eq!(
            Value::parse("6/4", Type::Rational).unwrap(),
            Value::Rat(BigRational::new(3.into(), 2.into()))
        );
        assert_eq!(Value::parse("3", Type::Rational).unwrap().to_string(), "3");
        assert!(matches!(
            Value::parse("-1", Type::Natural),
            Err(ValueError::Negative { .. })
        ));
        assert!(Value::parse("1/2", Type::Integer).is_err());
        assert!(Value::parse("1/0", Type::Rational).is_err());
        assert!(Value::parse("yes", Type::Boolean).is_err());
        assert_eq!(
            Value::parse("4/2", Type::Integer).unwrap(),
            Value::Int(2.into())
        );
    }

    #[test]
    fn json_inputs() {
        let v = serde_json::json!({"n": 46, "r": "1/3", "b": true});
        assert_eq!(
            Value::from_json(&v["n"], Type::Natural).unwrap(),
            Value::Int(46.into())
        );
        assert_eq!(
            Value::from_json(&v["r"], Type::Rational).unwrap(),
            Value::Rat(BigRational::new(1.into(), 3.into()))
        );
        assert_eq!(
            Value::from_json(&v["b"], Type::Boolean).unwrap(),
            Value::Bool(true)
        );
        assert!(Value::from_json(&serde_json::json!(1.5), Type::Rational).is_err());
    }

    fn arb_value() -> impl Strategy<Value = (Type, Value)> {
        prop_oneof![
            any::<bool>().prop_map(|b| (Type::Boolean, Value::Bool(b))),
            any::<i64>().prop_map(|v| (Type::Integer, Value::Int(v.into()))),
            (0u64..u64::MAX).prop_map(|v| (Type::Natural, Value::Int(v.into()))),
            (any::<i64>(), 1i64..i64::MAX).prop_map(|(n, d)| (
                Type::Rational,
                Value::Rat(BigRational::new(n.into(), d.into()))
            )),
        ]
    }

    proptest! {
        #[test]
        fn state_json_round_trip(entries in proptest::collection::vec(arb_value(), 0..6)) {
            let env: TypeEnv = entries.iter().enumerate().map(|(i, (t, _))| (format!("v{i}"), *t)).collect();
            let st: State = entries.into_iter().enumerate().map(|(i, (_, v))| (format!("v{i}"), v)).collect();
            let json = serde_json::to_string(&st).unwrap();
            let back: State = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back.conform(&env).unwrap(), st);
        }
    }
}
