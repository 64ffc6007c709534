use super::{subsample, Dataset, Metric, MetricError, ResamplingPlan, Split, TaskKind};
use crate::learn::{LearnError, Learner};
use crate::rng;
use crate::space::Params;
use serde::{Deserialize, Serialize};

/// Combines per-split scores into one estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    Mean,
    Median,
}

impl Aggregator {
    pub fn apply(self, v: &[f64]) -> Option<f64> {
        if v.is_empty() {
            return None;
        }
        match self {
            Aggregator::Mean => Some(v.iter().sum::<f64>() / v.len() as f64),
            Aggregator::Median => {
                let mut s = v.to_vec();
                s.sort_by(f64::total_cmp);
                let m = s.len();
                Some(if m % 2 == 1 { s[m / 2] } else { 0.5 * (s[m / 2 - 1] + s[m / 2]) })
            }
        }
    }
}

/// Resampled performance estimate on the metric's raw scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    /// `None` when the metric was undefined on every split.
    pub aggregate: Option<f64>,
    /// `None` marks a split where the metric was undefined.
    pub per_split: Vec<Option<f64>>,
    pub undefined: usize,
}

impl Estimate {
    pub fn from_splits(per_split: Vec<Option<f64>>, agr: Aggregator) -> Self {
        let defined: Vec<f64> = per_split.iter().flatten().copied().collect();
        Estimate { aggregate: agr.apply(&defined), undefined: per_split.len() - defined.len(), per_split }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("split {split}: {source}")]
pub struct EstimateError {
    pub split: usize,
    #[source]
    pub source: LearnError,
}

/// Trains on one split's training rows (optionally subsampled to
/// `train_fraction`, stratified for class targets) and scores the test
/// rows. An undefined metric value is `Ok(None)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_split(
    learner: &dyn Learner,
    params: &Params,
    data: &Dataset,
    split: &Split,
    metric: &Metric,
    seed: u64,
    train_fraction: f64,
) -> Result<Option<f64>, LearnError> {
    let train = if train_fraction < 1.0 {
        let strata = (data.task() == TaskKind::Classification).then(|| data.target());
        subsample(&split.train, train_fraction, strata, &mut rng::stream(seed, &[rng::label::SUBSAMPLE]))
    } else {
        split.train.clone()
    };
    let model = learner.train(&data.subset(&train), params, rng::derive_seed(seed, &[rng::label::EVAL]))?;
    let test = data.subset(&split.test);
    let pred = model.predict(&test)?;
    match metric.score(test.target(), &pred) {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::Undefined { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Resampling estimate of the generalization error: train and score on
/// every split of `plan`, then aggregate the defined split scores. Split
/// `b` uses the seed derived from `(seed, b)`.
pub fn estimate_ge(
    learner: &dyn Learner,
    params: &Params,
    data: &Dataset,
    plan: &ResamplingPlan,
    metric: &Metric,
    agr: Aggregator,
    seed: u64,
) -> Result<Estimate, EstimateError> {
    let per_split = plan
        .splits()
        .iter()
        .enumerate()
        .map(|(b, s)| {
            evaluate_split(learner, params, data, s, metric, rng::derive_seed(seed, &[rng::label::SPLIT, b as u64]), 1.0)
                .map_err(|source| EstimateError { split: b, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Estimate::from_splits(per_split, agr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_holdout, make_kfold, synth, Target};
    use crate::learn::{Featureless, FeaturelessRandom, Knn};

    #[test]
    fn random_labels_near_half() {
        let d = synth::random_labels(100, 2, 4);
        let plan = make_kfold(100, 10, 1, Some(d.target()), &mut rng::stream(4, &[])).unwrap();
        let e = estimate_ge(&FeaturelessRandom, &Params::new(), &d, &plan, &Metric::Ce, Aggregator::Mean, 4).unwrap();
        assert!((e.aggregate.unwrap() - 0.5).abs() < 0.15);
        assert_eq!(e.per_split.len(), 10);
    }

    #[test]
    fn constant_mean_holdout_closed_form() {
        let d = synth::linear(30, 2, 1.0, 8);
        let plan = make_holdout(30, 2.0 / 3.0, None, &mut rng::stream(8, &[])).unwrap();
        let e = estimate_ge(&Featureless, &Params::new(), &d, &plan, &Metric::Mse, Aggregator::Mean, 8).unwrap();
        let y = d.target().values().unwrap();
        let s = &plan.splits()[0];
        let m = s.train.iter().map(|&i| y[i]).sum::<f64>() / s.train.len() as f64;
        let want = s.test.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>() / s.test.len() as f64;
        assert!((e.aggregate.unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn leaked_test_set_memorized() {
        let d = synth::smooth_classification(50, 0.2, 2);
        let plan = ResamplingPlan::new_unchecked(50, vec![Split { train: (0..50).collect(), test: (0..25).collect() }]);
        let p = Params::new().with("k", 1i64);
        let e = estimate_ge(&Knn, &p, &d, &plan, &Metric::Ce, Aggregator::Mean, 0).unwrap();
        assert_eq!(e.aggregate, Some(0.0));
    }

    #[test]
    fn undefined_splits_are_counted() {
        let d = Dataset::from_matrix(
            &crate::data::Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]),
            Target::classes(vec![0, 0, 1, 0], 2),
        )
        .unwrap();
        let plan = ResamplingPlan::new(
            4,
            vec![Split { train: vec![0, 2], test: vec![1, 3] }, Split { train: vec![0, 1], test: vec![2, 3] }],
        )
        .unwrap();
        let e = estimate_ge(&Featureless, &Params::new(), &d, &plan, &Metric::Tpr, Aggregator::Mean, 0).unwrap();
        assert_eq!(e.undefined, 1);
        assert_eq!(e.per_split[0], None);
    }
}
