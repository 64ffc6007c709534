//! Text form of a search space.
//!
//! ```toml
//! [[param]]
//! name = "kernel"
//! kind = "categorical"
//! levels = ["lin", "rbf"]
//!
//! [[param]]
//! name = "gamma"
//! kind = "real"
//! lower = -12.0
//! upper = 12.0
//! trafo = "pow2"
//! condition = { parent = "kernel", values = ["rbf"] }
//! ```

use super::{Condition, Domain, ParamSpec, SearchSpace, SpaceError, Trafo};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDoc {
    pub name: String,
    pub kind: KindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_none_trafo")]
    pub trafo: Trafo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

fn is_none_trafo(t: &Trafo) -> bool {
    *t == Trafo::None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindDoc {
    Real,
    Integer,
    Categorical,
}

/// Serializable search-space document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    #[serde(default)]
    pub param: Vec<ParamDoc>,
}

impl TryFrom<&ParamDoc> for ParamSpec {
    type Error = SpaceError;

    fn try_from(d: &ParamDoc) -> Result<Self, SpaceError> {
        let missing = |what: &str| SpaceError::Document(format!("parameter `{}` needs `{what}`", d.name));
        let domain = match d.kind {
            KindDoc::Real => Domain::Real {
                lower: d.lower.ok_or_else(|| missing("lower"))?,
                upper: d.upper.ok_or_else(|| missing("upper"))?,
            },
            KindDoc::Integer => {
                let int = |v: f64| {
                    if v.fract() == 0.0 {
                        Ok(v as i64)
                    } else {
                        Err(SpaceError::Document(format!("parameter `{}`: integer bounds must be whole", d.name)))
                    }
                };
                Domain::Integer {
                    lower: int(d.lower.ok_or_else(|| missing("lower"))?)?,
                    upper: int(d.upper.ok_or_else(|| missing("upper"))?)?,
                }
            }
            KindDoc::Categorical => Domain::Categorical { levels: d.levels.clone().ok_or_else(|| missing("levels"))? },
        };
        Ok(ParamSpec { name: d.name.clone(), domain, trafo: d.trafo, condition: d.condition.clone() })
    }
}

impl From<&ParamSpec> for ParamDoc {
    fn from(s: &ParamSpec) -> Self {
        let (kind, lower, upper, levels) = match &s.domain {
            Domain::Real { lower, upper } => (KindDoc::Real, Some(*lower), Some(*upper), None),
            Domain::Integer { lower, upper } => (KindDoc::Integer, Some(*lower as f64), Some(*upper as f64), None),
            Domain::Categorical { levels } => (KindDoc::Categorical, None, None, Some(levels.clone())),
        };
        ParamDoc { name: s.name.clone(), kind, lower, upper, levels, trafo: s.trafo, condition: s.condition.clone() }
    }
}

impl SpaceDoc {
    pub fn build(&self) -> Result<SearchSpace, SpaceError> {
        SearchSpace::new(self.param.iter().map(ParamSpec::try_from).collect::<Result<_, _>>()?)
    }
}

impl From<&SearchSpace> for SpaceDoc {
    fn from(s: &SearchSpace) -> Self {
        SpaceDoc { param: s.specs().iter().map(ParamDoc::from).collect() }
    }
}

impl SearchSpace {
    pub fn from_toml_str(text: &str) -> Result<Self, SpaceError> {
        let doc: SpaceDoc = toml::from_str(text).map_err(|e| SpaceError::Document(e.to_string()))?;
        doc.build()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&SpaceDoc::from(self)).expect("space documents always serialize")
    }
}
