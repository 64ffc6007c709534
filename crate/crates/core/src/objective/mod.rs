//! The black-box objective `c(config)`: resampled learner performance or a
//! synthetic test function, plus the evaluation archive.
//!
//! An objective is evaluated instance by instance (resampling splits, or
//! noisy replicates of a synthetic function) so callers can schedule
//! instances in parallel or race configurations fold by fold. Scores on the
//! archive are always minimized; maximized metrics are negated once.

mod archive;
mod synthetic;

pub use archive::{Archive, ArchiveError, Entry, TracePoint, SCHEMA_VERSION};
pub use synthetic::{SyntheticFn, SyntheticObjective};

use crate::data::{evaluate_split, Aggregator, Dataset, Direction, Metric, ResamplingPlan};
use crate::learn::Learner;
use crate::rng;
use crate::space::{Config, SearchSpace};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Range of the abstract fidelity unit. A fidelity `f` trains on the
/// fraction `f / upper` of each training set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityRange {
    pub lower: f64,
    pub upper: f64,
}

/// Result of evaluating one configuration on all or some instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Instance ids evaluated.
    pub instances: Vec<usize>,
    /// Raw metric per instance; `None` where the metric is undefined.
    pub per_instance: Vec<Option<f64>>,
    /// Aggregated raw metric.
    pub raw: Option<f64>,
    pub error: Option<String>,
}

pub trait Objective: Send + Sync {
    fn id(&self) -> String;

    fn space(&self) -> &SearchSpace;

    /// Direction of the raw metric.
    fn direction(&self) -> Direction;

    fn fidelity(&self) -> Option<FidelityRange> {
        None
    }

    /// Number of instances (resampling splits or replicates).
    fn n_instances(&self) -> usize;

    /// Raw value on one instance. `Ok(None)` marks an undefined metric.
    fn evaluate_instance(&self, cfg: &Config, instance: usize, fidelity: f64, seed: u64) -> Result<Option<f64>, String>;

    fn aggregator(&self) -> Aggregator {
        Aggregator::Mean
    }

    /// Fidelity used when none is requested.
    fn full_fidelity(&self) -> f64 {
        self.fidelity().map_or(1.0, |f| f.upper)
    }

    /// Maps a raw metric value to the minimized scale.
    fn to_score(&self, raw: f64) -> f64 {
        match self.direction() {
            Direction::Minimize => raw,
            Direction::Maximize => -raw,
        }
    }
}

/// Seed of instance `instance` within the evaluation seeded `eval_seed`.
pub fn instance_seed(eval_seed: u64, instance: usize) -> u64 {
    rng::derive_seed(eval_seed, &[rng::label::SPLIT, instance as u64])
}

/// Combines per-instance results into an [`Evaluation`]. Non-finite
/// values count as instance errors.
pub fn combine(
    objective: &dyn Objective,
    instances: Vec<usize>,
    results: Vec<Result<Option<f64>, String>>,
) -> Evaluation {
    let mut per_instance = Vec::with_capacity(results.len());
    let mut error = None;
    for (i, r) in instances.iter().zip(results) {
        match r {
            Ok(Some(v)) if !v.is_finite() => {
                error.get_or_insert_with(|| format!("instance {i}: non-finite value {v}"));
                per_instance.push(None);
            }
            Ok(v) => per_instance.push(v),
            Err(e) => {
                error.get_or_insert_with(|| format!("instance {i}: {e}"));
                per_instance.push(None);
            }
        }
    }
    let defined: Vec<f64> = per_instance.iter().flatten().copied().collect();
    let raw = if error.is_some() { None } else { objective.aggregator().apply(&defined) };
    let error = error.or_else(|| raw.is_none().then(|| "metric undefined on every instance".to_string()));
    Evaluation { instances, per_instance, raw, error }
}

/// Evaluates `cfg` on the given instances (all when `None`), sequentially.
pub fn evaluate(
    objective: &dyn Objective,
    cfg: &Config,
    fidelity: Option<f64>,
    instances: Option<&[usize]>,
    eval_seed: u64,
) -> Evaluation {
    let fid = fidelity.unwrap_or_else(|| objective.full_fidelity());
    let instances: Vec<usize> = instances.map_or_else(|| (0..objective.n_instances()).collect(), <[usize]>::to_vec);
    let results = instances
        .iter()
        .map(|&i| objective.evaluate_instance(cfg, i, fid, instance_seed(eval_seed, i)))
        .collect();
    combine(objective, instances, results)
}

/// Learner performance estimated by a fixed resampling plan.
#[derive(Clone, Debug)]
pub struct ResampledObjective {
    pub learner: Arc<dyn Learner>,
    pub data: Arc<Dataset>,
    pub plan: ResamplingPlan,
    pub metric: Metric,
    pub aggregator: Aggregator,
    pub fidelity: Option<FidelityRange>,
    space: SearchSpace,
}

impl ResampledObjective {
    /// Tunes over the learner's preset space.
    pub fn new(learner: Arc<dyn Learner>, data: Arc<Dataset>, plan: ResamplingPlan, metric: Metric) -> Self {
        let space = learner.space();
        Self { learner, data, plan, metric, aggregator: Aggregator::Mean, fidelity: None, space }
    }

    pub fn with_space(mut self, space: SearchSpace) -> Self {
        self.space = space;
        self
    }

    pub fn with_fidelity(mut self, lower: f64, upper: f64) -> Self {
        self.fidelity = Some(FidelityRange { lower, upper });
        self
    }
}

impl Objective for ResampledObjective {
    fn id(&self) -> String {
        format!("{}/{}", self.learner.id(), self.metric.id())
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn direction(&self) -> Direction {
        self.metric.direction()
    }

    fn fidelity(&self) -> Option<FidelityRange> {
        self.fidelity
    }

    fn n_instances(&self) -> usize {
        self.plan.len()
    }

    fn aggregator(&self) -> Aggregator {
        self.aggregator
    }

    fn evaluate_instance(&self, cfg: &Config, instance: usize, fidelity: f64, seed: u64) -> Result<Option<f64>, String> {
        self.space.check(cfg).map_err(|e| e.to_string())?;
        let fraction = match self.fidelity {
            Some(r) => {
                if !(fidelity > 0.0 && fidelity <= r.upper) {
                    return Err(format!("fidelity {fidelity} outside (0, {}]", r.upper));
                }
                fidelity / r.upper
            }
            None => 1.0,
        };
        let split = self.plan.splits().get(instance).ok_or_else(|| format!("no split {instance}"))?;
        let params = self.space.transform(cfg);
        evaluate_split(self.learner.as_ref(), &params, &self.data, split, &self.metric, seed, fraction)
            .map_err(|e| e.to_string())
    }
}
