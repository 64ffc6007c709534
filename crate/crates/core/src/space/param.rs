use serde::{Deserialize, Serialize};
use std::fmt;

/// A hyperparameter value on the tuner scale (or, after [`Trafo::apply`],
/// on the learner scale).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            Value::Cat(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Cat(v.to_string())
    }
}

/// Monotone map from the tuner scale to the learner scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trafo {
    #[default]
    None,
    /// `x ↦ e^x`
    Exp,
    /// `x ↦ ⌊e^x⌋`
    ExpFloor,
    /// `x ↦ 2^x`
    Pow2,
    /// `x ↦ 10^x`
    Pow10,
}

impl Trafo {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Trafo::None => x,
            Trafo::Exp => x.exp(),
            Trafo::ExpFloor => floor_tolerant(x.exp()),
            Trafo::Pow2 => x.exp2(),
            Trafo::Pow10 => 10f64.powf(x),
        }
    }

    /// Whether the transformed value is always integral.
    pub fn is_integral(self) -> bool {
        matches!(self, Trafo::ExpFloor)
    }

    pub fn name(self) -> &'static str {
        match self {
            Trafo::None => "none",
            Trafo::Exp => "exp",
            Trafo::ExpFloor => "exp_floor",
            Trafo::Pow2 => "pow2",
            Trafo::Pow10 => "pow10",
        }
    }
}

// exp(ln k) lands one ulp below k for many integers k; treat those as k.
fn floor_tolerant(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        v.floor()
    }
}

/// The domain of a single hyperparameter on the tuner scale.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Real { lower: f64, upper: f64 },
    Integer { lower: i64, upper: i64 },
    Categorical { levels: Vec<String> },
}

impl Domain {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Domain::Real { .. } => "real",
            Domain::Integer { .. } => "integer",
            Domain::Categorical { .. } => "categorical",
        }
    }

    /// Width of a numeric domain; `None` for categoricals.
    pub fn range(&self) -> Option<f64> {
        match self {
            Domain::Real { lower, upper } => Some(upper - lower),
            Domain::Integer { lower, upper } => Some((upper - lower) as f64),
            Domain::Categorical { .. } => None,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Domain::Real { lower, upper } => Some((*lower, *upper)),
            Domain::Integer { lower, upper } => Some((*lower as f64, *upper as f64)),
            Domain::Categorical { .. } => None,
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Real { lower, upper }, Value::Real(v)) => v.is_finite() && *lower <= *v && *v <= *upper,
            (Domain::Integer { lower, upper }, Value::Int(v)) => *lower <= *v && *v <= *upper,
            (Domain::Categorical { levels }, Value::Cat(s)) => levels.iter().any(|l| l == s),
            _ => false,
        }
    }

    /// Clamps a numeric tuner-scale value into the domain, producing the
    /// right value variant.
    pub fn clamp_numeric(&self, x: f64) -> Option<Value> {
        match self {
            Domain::Real { lower, upper } => Some(Value::Real(x.clamp(*lower, *upper))),
            Domain::Integer { lower, upper } => Some(Value::Int((x.round() as i64).clamp(*lower, *upper))),
            Domain::Categorical { .. } => None,
        }
    }
}

/// A parameter is active only when its parent takes one of `values`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub parent: String,
    pub values: Vec<String>,
}

/// One named hyperparameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: Domain,
    pub trafo: Trafo,
    pub condition: Option<Condition>,
}

impl ParamSpec {
    pub fn real(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), domain: Domain::Real { lower, upper }, trafo: Trafo::None, condition: None }
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Self { name: name.into(), domain: Domain::Integer { lower, upper }, trafo: Trafo::None, condition: None }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Categorical { levels: levels.into_iter().map(Into::into).collect() },
            trafo: Trafo::None,
            condition: None,
        }
    }

    pub fn with_trafo(mut self, trafo: Trafo) -> Self {
        self.trafo = trafo;
        self
    }

    pub fn when<S: Into<String>>(mut self, parent: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        self.condition = Some(Condition { parent: parent.into(), values: values.into_iter().map(Into::into).collect() });
        self
    }

    /// Learner-scale view of a tuner-scale value.
    pub fn transform(&self, value: &Value) -> Value {
        match (value, self.trafo) {
            (Value::Cat(_), _) => value.clone(),
            (Value::Int(_), Trafo::None) => value.clone(),
            (v, trafo) => {
                let x = trafo.apply(v.as_f64().unwrap_or(f64::NAN));
                if trafo.is_integral() {
                    Value::Int(x as i64)
                } else {
                    Value::Real(x)
                }
            }
        }
    }
}
