//! Mixed, hierarchical hyperparameter search spaces.
//!
//! A [`SearchSpace`] is an ordered list of [`ParamSpec`]s. Each spec is
//! real, integer or categorical and may carry a monotone transformation
//! applied when a configuration is handed to a learner, plus a single-parent
//! condition that makes it active only for some levels of a categorical
//! parent. Tuners always work on the untransformed scale.

mod doc;
mod encode;
mod grid;
mod param;

pub use doc::SpaceDoc;
pub use param::{Condition, Domain, ParamSpec, Trafo, Value};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpaceError {
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter `{0}`: lower bound must be below upper bound")]
    EmptyRange(String),
    #[error("parameter `{0}`: categorical needs at least two distinct levels")]
    TooFewLevels(String),
    #[error("parameter `{name}`: condition parent `{parent}` does not exist")]
    UnknownParent { name: String, parent: String },
    #[error("parameter `{name}`: condition parent `{parent}` must be categorical")]
    ParentNotCategorical { name: String, parent: String },
    #[error("parameter `{name}`: condition value `{value}` is not a level of `{parent}`")]
    UnknownConditionLevel { name: String, parent: String, value: String },
    #[error("condition graph contains a cycle through `{0}`")]
    Cycle(String),
    #[error("parameter `{0}`: transformation is not strictly monotone on its bounds")]
    NotMonotone(String),
    #[error("grid resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error("invalid configuration: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("search spaces are incompatible: {0}")]
    Incompatible(String),
    #[error("space document: {0}")]
    Document(String),
}

/// A reason a configuration is not valid for a space.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// An active parameter has no value.
    Required(String),
    /// A value is given for a parameter whose condition is unmet.
    Inactive(String),
    OutOfBounds(String),
    UnknownName(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Required(n) => write!(f, "{n} required"),
            Violation::Inactive(n) => write!(f, "{n} inactive"),
            Violation::OutOfBounds(n) => write!(f, "{n} out of bounds"),
            Violation::UnknownName(n) => write!(f, "{n} unknown"),
        }
    }
}

/// A concrete hyperparameter configuration. Only active parameters are
/// present; values are stored on the tuner scale.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Config {
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.values.insert(name.into(), value.into());
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<Value>) {
        self.values.insert(name.into(), value.into());
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.values.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        f.write_str("}")
    }
}

/// Learner-scale parameters: a configuration after transformations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, Value>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.values.insert(name.into(), value.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn f64_or(&self, name: &str, default: f64) -> f64 {
        self.get(name).and_then(Value::as_f64).unwrap_or(default)
    }

    pub fn usize_or(&self, name: &str, default: usize) -> usize {
        self.get(name).and_then(Value::as_f64).map(|v| v.round().max(0.0) as usize).unwrap_or(default)
    }

    pub fn str_or<'a>(&'a self, name: &str, default: &'a str) -> &'a str {
        self.get(name).and_then(Value::as_str).unwrap_or(default)
    }

    /// Parameters whose names start with `prefix.`, with the prefix removed.
    pub fn scoped(&self, prefix: &str) -> Params {
        let p = format!("{prefix}.");
        let values = self
            .values
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(&p).map(|rest| (rest.to_string(), v.clone())))
            .collect();
        Params { values }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// An ordered, validated collection of parameter specs.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    specs: Vec<ParamSpec>,
    /// Spec indices with parents before children.
    order: Vec<usize>,
    index: HashMap<String, usize>,
}

impl SearchSpace {
    pub fn new(specs: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        let mut index = HashMap::new();
        for (i, s) in specs.iter().enumerate() {
            if index.insert(s.name.clone(), i).is_some() {
                return Err(SpaceError::DuplicateName(s.name.clone()));
            }
        }
        for s in &specs {
            match &s.domain {
                Domain::Real { lower, upper } => {
                    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                        return Err(SpaceError::EmptyRange(s.name.clone()));
                    }
                }
                Domain::Integer { lower, upper } => {
                    if lower >= upper {
                        return Err(SpaceError::EmptyRange(s.name.clone()));
                    }
                }
                Domain::Categorical { levels } => {
                    let mut distinct = levels.clone();
                    distinct.sort();
                    distinct.dedup();
                    if distinct.len() < 2 || distinct.len() != levels.len() {
                        return Err(SpaceError::TooFewLevels(s.name.clone()));
                    }
                }
            }
            if let Some(bounds) = s.domain.bounds() {
                if !trafo_monotone(s.trafo, bounds) {
                    return Err(SpaceError::NotMonotone(s.name.clone()));
                }
            }
            if let Some(c) = &s.condition {
                let parent = index.get(&c.parent).map(|&i| &specs[i]).ok_or_else(|| SpaceError::UnknownParent {
                    name: s.name.clone(),
                    parent: c.parent.clone(),
                })?;
                let Domain::Categorical { levels } = &parent.domain else {
                    return Err(SpaceError::ParentNotCategorical { name: s.name.clone(), parent: c.parent.clone() });
                };
                for v in &c.values {
                    if !levels.contains(v) {
                        return Err(SpaceError::UnknownConditionLevel {
                            name: s.name.clone(),
                            parent: c.parent.clone(),
                            value: v.clone(),
                        });
                    }
                }
            }
        }
        let order = topological_order(&specs, &index)?;
        Ok(Self { specs, order, index })
    }

    /// Number of parameters.
    pub fn dim(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn spec(&self, name: &str) -> Option<&ParamSpec> {
        self.index.get(name).map(|&i| &self.specs[i])
    }

    /// Specs in an order where every parent precedes its children.
    pub fn topological(&self) -> impl Iterator<Item = &ParamSpec> {
        self.order.iter().map(|&i| &self.specs[i])
    }

    pub fn has_conditions(&self) -> bool {
        self.specs.iter().any(|s| s.condition.is_some())
    }

    /// Whether `spec`'s condition is satisfied by the values in `values`.
    /// The parent must itself be present (and hence active).
    fn condition_met(&self, spec: &ParamSpec, values: &BTreeMap<String, Value>) -> bool {
        match &spec.condition {
            None => true,
            Some(c) => match values.get(&c.parent) {
                Some(Value::Cat(level)) => c.values.iter().any(|v| v == level),
                _ => false,
            },
        }
    }

    /// Checks a configuration, returning every violation found.
    pub fn validate(&self, cfg: &Config) -> Vec<Violation> {
        let mut out = Vec::new();
        for name in cfg.values.keys() {
            if !self.index.contains_key(name) {
                out.push(Violation::UnknownName(name.clone()));
            }
        }
        for spec in self.topological() {
            let active = self.condition_met(spec, &cfg.values);
            match (active, cfg.values.get(&spec.name)) {
                (true, None) => out.push(Violation::Required(spec.name.clone())),
                (false, Some(_)) => out.push(Violation::Inactive(spec.name.clone())),
                (true, Some(v)) if !spec.domain.contains(v) => out.push(Violation::OutOfBounds(spec.name.clone())),
                _ => {}
            }
        }
        out
    }

    pub fn is_valid(&self, cfg: &Config) -> bool {
        self.validate(cfg).is_empty()
    }

    pub fn check(&self, cfg: &Config) -> Result<(), SpaceError> {
        let v = self.validate(cfg);
        if v.is_empty() {
            Ok(())
        } else {
            Err(SpaceError::Invalid(v))
        }
    }

    /// Draws a value uniformly from one spec's domain.
    pub fn sample_value<R: rand::Rng + ?Sized>(spec: &ParamSpec, rng: &mut R) -> Value {
        match &spec.domain {
            Domain::Real { lower, upper } => Value::Real(rng.random_range(*lower..=*upper)),
            Domain::Integer { lower, upper } => Value::Int(rng.random_range(*lower..=*upper)),
            Domain::Categorical { levels } => Value::Cat(levels[rng.random_range(0..levels.len())].clone()),
        }
    }

    /// Uniform configuration: parents are drawn before children, so the
    /// active set follows the sampled parent levels.
    pub fn sample_uniform<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Config {
        let mut values = BTreeMap::new();
        for spec in self.topological() {
            if self.condition_met(spec, &values) {
                values.insert(spec.name.clone(), Self::sample_value(spec, rng));
            }
        }
        Config { values }
    }

    /// Canonicalizes a partial or over-full assignment: inactive entries
    /// are dropped, missing active ones are sampled uniformly and numeric
    /// values are clamped into their bounds.
    pub fn repair<R: rand::Rng + ?Sized>(&self, cfg: Config, rng: &mut R) -> Config {
        let mut given = cfg.values;
        let mut values = BTreeMap::new();
        for spec in self.topological() {
            if !self.condition_met(spec, &values) {
                continue;
            }
            let v = match given.remove(&spec.name) {
                Some(v) if spec.domain.contains(&v) => v,
                Some(v) => match v.as_f64().and_then(|x| spec.domain.clamp_numeric(x)) {
                    Some(c) => c,
                    None => Self::sample_value(spec, rng),
                },
                None => Self::sample_value(spec, rng),
            };
            values.insert(spec.name.clone(), v);
        }
        Config { values }
    }

    /// Drops inactive entries without sampling anything. Returns `None`
    /// when an active parameter would be missing.
    pub fn canonicalize(&self, cfg: &Config) -> Option<Config> {
        let mut values = BTreeMap::new();
        for spec in self.topological() {
            if self.condition_met(spec, &values) {
                values.insert(spec.name.clone(), cfg.values.get(&spec.name)?.clone());
            }
        }
        Some(Config { values })
    }

    /// Learner-scale view of a configuration.
    pub fn transform(&self, cfg: &Config) -> Params {
        let values = cfg
            .values
            .iter()
            .map(|(k, v)| {
                let tv = self.spec(k).map(|s| s.transform(v)).unwrap_or_else(|| v.clone());
                (k.clone(), tv)
            })
            .collect();
        Params { values }
    }

    /// Checks that two spaces share names, kinds and bounds.
    pub fn compatible_with(&self, other: &SearchSpace) -> Result<(), SpaceError> {
        if self.specs.len() != other.specs.len() {
            return Err(SpaceError::Incompatible(format!(
                "{} parameters vs {}",
                self.specs.len(),
                other.specs.len()
            )));
        }
        for s in &self.specs {
            match other.spec(&s.name) {
                None => return Err(SpaceError::Incompatible(format!("`{}` missing", s.name))),
                Some(o) if o.domain != s.domain => {
                    return Err(SpaceError::Incompatible(format!("`{}` has a different domain", s.name)))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Prefixes every parameter (and condition parent) with `prefix.`.
    pub fn prefixed(&self, prefix: &str) -> SearchSpace {
        let specs = self
            .specs
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.name = format!("{prefix}.{}", s.name);
                if let Some(c) = &mut s.condition {
                    c.parent = format!("{prefix}.{}", c.parent);
                }
                s
            })
            .collect();
        SearchSpace::new(specs).expect("prefixing preserves validity")
    }
}

fn trafo_monotone(trafo: Trafo, (lower, upper): (f64, f64)) -> bool {
    if trafo == Trafo::None {
        return true;
    }
    // Floor-type maps are only weakly monotone; check the continuous part.
    let f = |x: f64| match trafo {
        Trafo::ExpFloor => x.exp(),
        t => t.apply(x),
    };
    const STEPS: usize = 64;
    let mut prev = f(lower);
    for i in 1..=STEPS {
        let x = lower + (upper - lower) * i as f64 / STEPS as f64;
        let y = f(x);
        if !(y.is_finite() && y > prev) {
            return false;
        }
        prev = y;
    }
    true
}

fn topological_order(specs: &[ParamSpec], index: &HashMap<String, usize>) -> Result<Vec<usize>, SpaceError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; specs.len()];
    let mut order = Vec::with_capacity(specs.len());
    for start in 0..specs.len() {
        let mut chain = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state[i] {
                2 => break,
                1 => return Err(SpaceError::Cycle(specs[i].name.clone())),
                _ => {}
            }
            state[i] = 1;
            chain.push(i);
            cur = specs[i].condition.as_ref().map(|c| index[&c.parent]);
        }
        for &i in chain.iter().rev() {
            state[i] = 2;
            order.push(i);
        }
    }
    Ok(order)
}
