//! Learners, preprocessing operators, pipelines and threshold tuning.
//!
//! A [`Learner`] maps a dataset and learner-scale [`Params`] to a fitted
//! [`Model`]. Each learner carries a preset [`SearchSpace`]; pipelines and
//! branches combine the spaces of their parts under namespaced names
//! (`"knn.k"`, `"branch"`, ...).

mod cart;
mod elastic_net;
mod featureless;
mod knn;
mod pipeline;
mod preprocess;
mod threshold;

pub use cart::{Cart, Node as TreeNode, Tree};
pub use elastic_net::{ElasticNet, LinearModel};
pub use featureless::{Featureless, FeaturelessRandom};
pub use knn::{Kernel, Knn};
pub use pipeline::{Branch, Pipeline};
pub use preprocess::{CorrelationFilter, Impute, ImputeMethod, OneHot, Preprocessor, Standardize, Subsample, Transform};
pub use threshold::{tune_threshold, tune_weights, ThresholdRule, TunedThreshold};

use crate::data::{DataError, Dataset, MetricError, PredictionMatrix, TaskKind};
use crate::space::{Params, SearchSpace};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("learner `{learner}` does not support {what}")]
    Unsupported { learner: String, what: String },
    #[error("invalid hyperparameter: {0}")]
    Param(String),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("prediction input does not match the training data: {0}")]
    Schema(String),
    #[error("unknown learner id `{0}`")]
    UnknownId(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// What kinds of data a learner accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub regression: bool,
    pub classification: bool,
    /// Multiclass targets (more than two classes).
    pub multiclass: bool,
    pub missing: bool,
    pub categorical: bool,
    pub probabilities: bool,
}

impl Capabilities {
    pub fn supports(&self, task: TaskKind) -> bool {
        match task {
            TaskKind::Regression => self.regression,
            TaskKind::Classification => self.classification,
        }
    }
}

/// A fitted predictor.
pub trait Predictor: Send + Sync + fmt::Debug {
    fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError>;
}

/// An inducer with a preset search space.
pub trait Learner: Send + Sync + fmt::Debug {
    fn id(&self) -> String;

    /// Preset search space, on the tuner scale.
    fn space(&self) -> SearchSpace;

    fn capabilities(&self) -> Capabilities;

    /// Fits on `data`. Implementations may assume [`Learner::train`]
    /// already checked capabilities.
    fn fit(&self, data: &Dataset, params: &Params, seed: u64) -> Result<Box<dyn Predictor>, LearnError>;

    /// Checks capabilities, fits and records training metadata.
    fn train(&self, data: &Dataset, params: &Params, seed: u64) -> Result<Model, LearnError> {
        check_capabilities(&self.id(), &self.capabilities(), data)?;
        let start = Instant::now();
        let predictor = self.fit(data, params, seed)?;
        Ok(Model { learner: self.id(), n_train: data.n(), train_seconds: start.elapsed().as_secs_f64(), predictor })
    }
}

pub(crate) fn check_capabilities(id: &str, caps: &Capabilities, data: &Dataset) -> Result<(), LearnError> {
    let unsupported = |what: &str| Err(LearnError::Unsupported { learner: id.to_string(), what: what.to_string() });
    if !caps.supports(data.task()) {
        return unsupported(match data.task() {
            TaskKind::Regression => "regression",
            TaskKind::Classification => "classification",
        });
    }
    if data.target().n_classes() > 2 && !caps.multiclass {
        return unsupported("multiclass targets");
    }
    if !caps.missing && data.has_missing() {
        return unsupported("missing values");
    }
    if !caps.categorical && data.has_categorical() {
        return unsupported("categorical features");
    }
    Ok(())
}

/// A trained model with its training metadata.
#[derive(Debug)]
pub struct Model {
    pub learner: String,
    pub n_train: usize,
    pub train_seconds: f64,
    predictor: Box<dyn Predictor>,
}

impl Model {
    pub fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError> {
        let p = self.predictor.predict(data)?;
        debug_assert_eq!(p.nrows(), data.n());
        Ok(p)
    }
}

/// Resolves a learner id.
///
/// Plain ids: `knn`, `elastic_net`, `cart`, `featureless`,
/// `featureless_random`. Pipelines: `pipe:op+op+learner` with ops
/// `impute`, `impute_indicator`, `onehot`, `standardize`, `filter`,
/// `subsample`. Branches: `branch:a|b|...` over plain ids or pipelines.
pub fn by_id(id: &str) -> Result<Arc<dyn Learner>, LearnError> {
    if let Some(rest) = id.strip_prefix("branch:") {
        let options = rest.split('|').map(by_id).collect::<Result<Vec<_>, _>>()?;
        return Ok(Arc::new(Branch::new(options).map_err(|e| LearnError::Param(e.to_string()))?));
    }
    if let Some(rest) = id.strip_prefix("pipe:") {
        let parts: Vec<&str> = rest.split('+').collect();
        let (learner, ops) = parts.split_last().ok_or_else(|| LearnError::UnknownId(id.to_string()))?;
        let ops = ops.iter().map(|op| preprocess::by_id(op)).collect::<Result<Vec<_>, _>>()?;
        return Ok(Arc::new(Pipeline::new(ops, by_id(learner)?)));
    }
    Ok(match id {
        "knn" => Arc::new(Knn),
        "elastic_net" => Arc::new(ElasticNet::default()),
        "cart" => Arc::new(Cart),
        "featureless" => Arc::new(Featureless),
        "featureless_random" => Arc::new(FeaturelessRandom),
        other => return Err(LearnError::UnknownId(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_ids() {
        for id in ["knn", "elastic_net", "cart", "featureless", "featureless_random"] {
            assert_eq!(by_id(id).unwrap().id(), id);
        }
        let p = by_id("pipe:impute+standardize+knn").unwrap();
        assert_eq!(p.id(), "pipe:impute+standardize+knn");
        assert!(p.space().spec("knn.k").is_some());
        let b = by_id("branch:elastic_net|knn").unwrap();
        assert!(b.space().spec("branch").is_some());
        assert!(by_id("svm").is_err());
    }
}
