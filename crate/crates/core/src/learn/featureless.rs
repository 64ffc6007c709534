use super::{Capabilities, LearnError, Learner, Predictor};
use crate::data::{Dataset, PredictionMatrix, Target};
use crate::rng;
use crate::space::{ParamSpec, Params, SearchSpace};
use rand::Rng as _;

/// Ignores the features: predicts the training mean, or the training
/// class frequencies (so the hard label is the majority class).
#[derive(Clone, Copy, Debug, Default)]
pub struct Featureless;

#[derive(Debug)]
struct Constant {
    row: Vec<f64>,
    probabilities: bool,
}

impl Learner for Featureless {
    fn id(&self) -> String {
        "featureless".into()
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::new(Vec::new()).expect("empty space")
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            regression: true,
            classification: true,
            multiclass: true,
            missing: true,
            categorical: true,
            probabilities: true,
        }
    }

    fn fit(&self, data: &Dataset, _params: &Params, _seed: u64) -> Result<Box<dyn Predictor>, LearnError> {
        let n = data.n() as f64;
        Ok(Box::new(match data.target() {
            Target::Regression(y) => Constant { row: vec![y.iter().sum::<f64>() / n], probabilities: false },
            t @ Target::Classes { .. } => {
                Constant { row: t.class_counts().iter().map(|&c| c as f64 / n).collect(), probabilities: true }
            }
        }))
    }
}

impl Predictor for Constant {
    fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError> {
        let m = data.n();
        if self.probabilities {
            let g = self.row.len();
            Ok(PredictionMatrix::probabilities(m, g, self.row.iter().copied().cycle().take(m * g).collect())?)
        } else {
            Ok(PredictionMatrix::regression(vec![self.row[0]; m]))
        }
    }
}

/// Predicts a uniformly random training class for every row, ignoring
/// features and its single inert hyperparameter `dummy`. Its true
/// misclassification error on balanced binary data is 0.5 whatever the
/// configuration, which makes it the reference learner for overtuning.
#[derive(Clone, Copy, Debug, Default)]
pub struct FeaturelessRandom;

#[derive(Debug)]
struct RandomLabels {
    g: usize,
    seed: u64,
}

impl Learner for FeaturelessRandom {
    fn id(&self) -> String {
        "featureless_random".into()
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::real("dummy", 0.0, 1.0)]).expect("valid preset")
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            regression: false,
            classification: true,
            multiclass: true,
            missing: true,
            categorical: true,
            probabilities: true,
        }
    }

    fn fit(&self, data: &Dataset, _params: &Params, seed: u64) -> Result<Box<dyn Predictor>, LearnError> {
        Ok(Box::new(RandomLabels { g: data.target().n_classes(), seed }))
    }
}

impl Predictor for RandomLabels {
    fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError> {
        let mut r = rng::stream(self.seed, &[data.n() as u64]);
        let m = data.n();
        let mut out = vec![0.0; m * self.g];
        for i in 0..m {
            out[i * self.g + r.random_range(0..self.g)] = 1.0;
        }
        Ok(PredictionMatrix::probabilities(m, self.g, out)?)
    }
}
