use super::{check_capabilities, Capabilities, LearnError, Learner, Predictor, Preprocessor, Transform};
use crate::data::{Dataset, PredictionMatrix};
use crate::rng;
use crate::space::{ParamSpec, Params, SearchSpace, SpaceError};
use std::sync::Arc;

/// Preprocessing operators followed by a terminal learner.
///
/// The combined space holds each operator's parameters under
/// `<op id>.<name>` and the learner's under `<learner id>.<name>`. During
/// training every node is fitted only on the output of its predecessor.
#[derive(Clone, Debug)]
pub struct Pipeline {
    ops: Vec<Arc<dyn Preprocessor>>,
    learner: Arc<dyn Learner>,
}

impl Pipeline {
    pub fn new(ops: Vec<Arc<dyn Preprocessor>>, learner: Arc<dyn Learner>) -> Self {
        Self { ops, learner }
    }
}

#[derive(Debug)]
struct PipelineModel {
    transforms: Vec<Box<dyn Transform>>,
    model: super::Model,
}

impl Learner for Pipeline {
    fn id(&self) -> String {
        let mut parts: Vec<String> = self.ops.iter().map(|o| o.id()).collect();
        parts.push(self.learner.id());
        format!("pipe:{}", parts.join("+"))
    }

    fn space(&self) -> SearchSpace {
        let mut specs: Vec<ParamSpec> = Vec::new();
        for op in &self.ops {
            specs.extend(op.space().prefixed(&op.id()).specs().iter().cloned());
        }
        specs.extend(self.learner.space().prefixed(&self.learner.id()).specs().iter().cloned());
        SearchSpace::new(specs).expect("node ids are distinct")
    }

    fn capabilities(&self) -> Capabilities {
        let mut c = self.learner.capabilities();
        c.missing |= self.ops.iter().any(|o| o.removes_missing());
        c.categorical |= self.ops.iter().any(|o| o.removes_categorical());
        c
    }

    fn fit(&self, data: &Dataset, params: &Params, seed: u64) -> Result<Box<dyn Predictor>, LearnError> {
        let mut current = data.clone();
        let mut transforms = Vec::with_capacity(self.ops.len());
        for (i, op) in self.ops.iter().enumerate() {
            let (t, out) = op.fit_transform(&current, &params.scoped(&op.id()), rng::derive_seed(seed, &[i as u64]))?;
            transforms.push(t);
            current = out;
        }
        let model = self.learner.train(&current, &params.scoped(&self.learner.id()), rng::derive_seed(seed, &[self.ops.len() as u64]))?;
        Ok(Box::new(PipelineModel { transforms, model }))
    }
}

impl Predictor for PipelineModel {
    fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError> {
        let mut current = data.clone();
        for t in &self.transforms {
            current = t.apply(&current)?;
        }
        self.model.predict(&current)
    }
}

/// Chooses one of several learners through the categorical parameter
/// `branch`, whose levels are the option ids. Each option's parameters
/// live under `<option id>.<name>` and are active only when that option
/// is chosen.
#[derive(Clone, Debug)]
pub struct Branch {
    options: Vec<Arc<dyn Learner>>,
}

pub const BRANCH_PARAM: &str = "branch";

impl Branch {
    pub fn new(options: Vec<Arc<dyn Learner>>) -> Result<Self, SpaceError> {
        let b = Self { options };
        // validates distinct option ids and a well-formed combined space
        b.try_space()?;
        Ok(b)
    }

    fn try_space(&self) -> Result<SearchSpace, SpaceError> {
        let ids: Vec<String> = self.options.iter().map(|o| o.id()).collect();
        let mut specs = vec![ParamSpec::categorical(BRANCH_PARAM, ids.clone())];
        for (o, id) in self.options.iter().zip(&ids) {
            for s in o.space().prefixed(id).specs() {
                let s = s.clone();
                specs.push(if s.condition.is_none() { s.when(BRANCH_PARAM, [id.as_str()]) } else { s });
            }
        }
        SearchSpace::new(specs)
    }

    fn chosen(&self, params: &Params) -> Result<&Arc<dyn Learner>, LearnError> {
        let name = params
            .get(BRANCH_PARAM)
            .and_then(|v| v.as_str())
            .ok_or_else(|| LearnError::Param("branch choice missing".into()))?;
        self.options
            .iter()
            .find(|o| o.id() == name)
            .ok_or_else(|| LearnError::Param(format!("branch `{name}` does not exist")))
    }
}

impl Learner for Branch {
    fn id(&self) -> String {
        format!("branch:{}", self.options.iter().map(|o| o.id()).collect::<Vec<_>>().join("|"))
    }

    fn space(&self) -> SearchSpace {
        self.try_space().expect("checked at construction")
    }

    /// Intersection over options, since any of them may be chosen.
    fn capabilities(&self) -> Capabilities {
        let mut it = self.options.iter().map(|o| o.capabilities());
        let first = it.next().expect("at least two options");
        it.fold(first, |a, c| Capabilities {
            regression: a.regression && c.regression,
            classification: a.classification && c.classification,
            multiclass: a.multiclass && c.multiclass,
            missing: a.missing && c.missing,
            categorical: a.categorical && c.categorical,
            probabilities: a.probabilities && c.probabilities,
        })
    }

    fn train(&self, data: &Dataset, params: &Params, seed: u64) -> Result<super::Model, LearnError> {
        let chosen = self.chosen(params)?;
        check_capabilities(&chosen.id(), &chosen.capabilities(), data)?;
        let mut m = chosen.train(data, &params.scoped(&chosen.id()), seed)?;
        m.learner = self.id();
        Ok(m)
    }

    fn fit(&self, data: &Dataset, params: &Params, seed: u64) -> Result<Box<dyn Predictor>, LearnError> {
        let chosen = self.chosen(params)?;
        chosen.fit(data, &params.scoped(&chosen.id()), seed)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{by_id, ElasticNet, Knn, Standardize};
    use super::*;
    use crate::data::synth;
    use crate::space::Config;

    #[test]
    fn branch_conditions_hide_other_options() {
        let b = Branch::new(vec![Arc::new(ElasticNet::default()), Arc::new(Knn)]).unwrap();
        let s = b.space();
        let cfg = Config::new().with("branch", "knn").with("knn.k", 1.0).with("knn.distance", 2.0).with("knn.kernel", "rank");
        assert!(s.is_valid(&cfg));
        let with_en = cfg.clone().with("elastic_net.alpha", 0.5);
        assert!(!s.is_valid(&with_en));
        let mut r = rng::stream(3, &[]);
        for _ in 0..50 {
            let c = s.sample_uniform(&mut r);
            let choice = c.get("branch").unwrap().as_str().unwrap().to_string();
            for (name, _) in c.iter() {
                assert!(name == "branch" || name.starts_with(&format!("{choice}.")));
            }
        }
    }

    #[test]
    fn branch_routes_to_chosen_learner() {
        let d = synth::linear(40, 2, 0.1, 3);
        let b = by_id("branch:elastic_net|featureless").unwrap();
        let params = Params::new().with("branch", "featureless");
        let f = b.train(&d, &params, 0).unwrap().predict(&d).unwrap();
        assert!(f.values().windows(2).all(|w| w[0] == w[1]));
        assert!(b.train(&d, &Params::new().with("branch", "svm"), 0).is_err());
    }

    #[test]
    fn pipeline_standardizes_before_learner() {
        let d = synth::linear(40, 2, 0.1, 3);
        let p = Pipeline::new(vec![Arc::new(Standardize)], Arc::new(ElasticNet::default()));
        let params = Params::new().with("elastic_net.s", 1e-6).with("elastic_net.alpha", 0.0);
        let f = p.train(&d, &params, 0).unwrap().predict(&d).unwrap();
        let mse = crate::data::Metric::Mse.score(d.target(), &f).unwrap();
        assert!(mse < 0.05, "{mse}");
    }
}
