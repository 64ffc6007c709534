use super::{TunedLearner, TunedModel};
use crate::exec::{Executor, Level};
use crate::objective::Archive;
use crate::space::Config;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Wall time of one outer split. Kept out of the serialized report so
/// reports of identical runs compare equal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldTimings {
    pub tuning: f64,
    pub refit: f64,
    pub outer_eval: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    /// Outer test score; `None` if undefined or the split failed.
    pub score: Option<f64>,
    /// Configuration chosen on this split's training rows.
    pub config: Option<Config>,
    /// Inner estimate of that configuration.
    pub inner_estimate: Option<f64>,
    pub evals: usize,
    pub stop: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip)]
    pub timings: FoldTimings,
    #[serde(skip)]
    pub archive: Option<Archive>,
}

impl FoldReport {
    pub(super) fn success(fold: usize, m: &TunedModel, score: Option<f64>, eval_seconds: f64) -> Self {
        Self {
            fold,
            score,
            config: Some(m.config.clone()),
            inner_estimate: Some(m.inner_estimate),
            evals: m.outcome.archive.len(),
            stop: Some(m.outcome.stop.to_string()),
            error: None,
            timings: FoldTimings { tuning: m.tune_seconds, refit: m.refit_seconds, outer_eval: eval_seconds },
            archive: Some(m.outcome.archive.clone()),
        }
    }

    pub(super) fn failure(fold: usize, error: String) -> Self {
        Self {
            fold,
            score: None,
            config: None,
            inner_estimate: None,
            evals: 0,
            stop: None,
            error: Some(error),
            timings: FoldTimings::default(),
            archive: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedReport {
    pub learner: String,
    pub metric: String,
    pub tuner: String,
    pub folds: Vec<FoldReport>,
    /// Mean outer score over the splits where it is defined.
    pub aggregate: Option<f64>,
    pub sd: Option<f64>,
    /// Mean inner estimate of the chosen configurations.
    pub inner_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_config: Option<Config>,
    #[serde(skip)]
    pub level: Level,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub wall_seconds: f64,
}

fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.len() > 1).then(|| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(m), sd)
}

impl NestedReport {
    pub(super) fn new(tl: &TunedLearner, folds: Vec<FoldReport>, final_config: Option<Config>, exec: &Executor, wall: f64) -> Self {
        let scores: Vec<f64> = folds.iter().filter_map(|f| f.score).collect();
        let inner: Vec<f64> = folds.iter().filter_map(|f| f.inner_estimate).collect();
        let (aggregate, sd) = mean_sd(&scores);
        Self {
            learner: tl.learner.id(),
            metric: tl.metric.id().to_string(),
            tuner: tl.tuner.kind().to_string(),
            folds,
            aggregate,
            sd,
            inner_mean: mean_sd(&inner).0,
            final_config,
            level: exec.level(),
            workers: exec.workers(),
            wall_seconds: wall,
        }
    }

    pub fn n_failed(&self) -> usize {
        self.folds.iter().filter(|f| f.error.is_some()).count()
    }

    /// Summed wall time over the splits.
    pub fn timings(&self) -> FoldTimings {
        self.folds.iter().fold(FoldTimings::default(), |a, f| FoldTimings {
            tuning: a.tuning + f.timings.tuning,
            refit: a.refit + f.timings.refit,
            outer_eval: a.outer_eval + f.timings.outer_eval,
        })
    }

    /// Plain-text table, one row per outer split.
    pub fn table(&self) -> String {
        let num = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
        let mut s = String::new();
        let _ = writeln!(s, "nested resampling: {} tuned by {}, metric {}", self.learner, self.tuner, self.metric);
        let _ = writeln!(s, "{:>4}  {:>10}  {:>10}  {:>6}  configuration", "fold", "outer", "inner", "evals");
        for f in &self.folds {
            let cfg = match (&f.config, &f.error) {
                (Some(c), _) => c.to_string(),
                (None, Some(e)) => format!("failed: {e}"),
                (None, None) => String::new(),
            };
            let _ = writeln!(s, "{:>4}  {:>10}  {:>10}  {:>6}  {cfg}", f.fold, num(f.score), num(f.inner_estimate), f.evals);
        }
        let _ = writeln!(s, "outer {} +- {}, inner mean {}", num(self.aggregate), num(self.sd), num(self.inner_mean));
        if let Some(c) = &self.final_config {
            let _ = writeln!(s, "configuration tuned on all data: {c}");
        }
        s
    }
}
