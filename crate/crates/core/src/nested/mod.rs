//! Self-tuning learners and nested resampling.
//!
//! A [`TunedLearner`] trains in two steps: tune on the given rows with an
//! inner resampling, then refit on all of them with the chosen
//! configuration. [`nested_evaluate`] wraps that in an outer resampling so
//! the outer test rows never take part in tuning.

mod report;

pub use report::{FoldReport, FoldTimings, NestedReport};

use crate::data::{DataError, Dataset, Direction, Metric, MetricError, PredictionMatrix, ResamplingPlan, ResamplingSpec, Split};
use crate::exec::{Executor, Level};
use crate::learn::{Capabilities, LearnError, Learner, Model, Predictor};
use crate::objective::{FidelityRange, Objective, ResampledObjective};
use crate::rng;
use crate::space::{Config, Params, SearchSpace};
use crate::tuners::{RunOptions, RunOutcome, Termination, Tuner, TunerError, TunerSpec, TuningRun};
use std::sync::{Arc, Mutex};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum NestedError {
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error("tuning produced no successful evaluation")]
    NoSuccess,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("outer split {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<NestedError>,
    },
}

/// A learner whose training tunes its own hyperparameters.
#[derive(Clone, Debug)]
pub struct TunedLearner {
    pub learner: Arc<dyn Learner>,
    pub space: SearchSpace,
    pub tuner: TunerSpec,
    pub inner: ResamplingSpec,
    pub metric: Metric,
    pub termination: Termination,
    /// Fidelity range in training-subsample units, for multi-fidelity tuners.
    pub fidelity: Option<FidelityRange>,
    pub failure_penalty: f64,
}

/// Result of [`TunedLearner::tune`].
#[derive(Debug)]
pub struct TunedModel {
    pub config: Config,
    pub params: Params,
    /// Inner estimate of the chosen configuration, on the metric's scale.
    pub inner_estimate: f64,
    pub outcome: RunOutcome,
    pub inner_plan: ResamplingPlan,
    pub model: Model,
    pub tune_seconds: f64,
    pub refit_seconds: f64,
}

impl Predictor for TunedModel {
    fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError> {
        self.model.predict(data)
    }
}

/// Fails unless every inner split lies inside `outer.train` and avoids
/// `outer.test`.
pub fn check_containment(inner: &ResamplingPlan, outer: &Split) -> Result<(), String> {
    let mut in_train = vec![false; inner.n()];
    let mut in_test = vec![false; inner.n()];
    for &i in &outer.train {
        in_train[i] = true;
    }
    for &i in &outer.test {
        in_test[i] = true;
    }
    for (b, s) in inner.splits().iter().enumerate() {
        if let Some(&i) = s.train.iter().chain(&s.test).find(|&&i| !in_train[i] || in_test[i]) {
            return Err(format!("inner split {b} uses row {i} outside the outer training set"));
        }
    }
    Ok(())
}

/// Per-fold tuning state, advanced by [`TuningRun::step`].
struct FoldRun {
    objective: ResampledObjective,
    tuner: Box<dyn Tuner>,
    run: TuningRun,
    opts: RunOptions,
    rows: Vec<usize>,
    seed: u64,
    started: Instant,
    error: Option<NestedError>,
}

impl TunedLearner {
    pub fn new(learner: Arc<dyn Learner>, tuner: TunerSpec, inner: ResamplingSpec, metric: Metric, termination: Termination) -> Self {
        let space = learner.space();
        Self { learner, space, tuner, inner, metric, termination, fidelity: None, failure_penalty: 1.0 }
    }

    pub fn with_space(mut self, space: SearchSpace) -> Self {
        self.space = space;
        self
    }

    pub fn with_fidelity(mut self, lower: f64, upper: f64) -> Self {
        self.fidelity = Some(FidelityRange { lower, upper });
        self
    }

    fn start(&self, data: &Arc<Dataset>, rows: &[usize], seed: u64) -> Result<FoldRun, NestedError> {
        self.termination.validate().map_err(TunerError::Setting)?;
        let target = data.target().subset(rows);
        let plan = self
            .inner
            .instantiate(&target, &mut rng::stream(seed, &[rng::label::INNER_PLAN]))?
            .mapped(rows, data.n());
        let mut objective = ResampledObjective::new(self.learner.clone(), data.clone(), plan, self.metric.clone())
            .with_space(self.space.clone());
        if let Some(f) = self.fidelity {
            objective = objective.with_fidelity(f.lower, f.upper);
        }
        let tuner = self.tuner.build(&self.space, self.fidelity, objective.n_instances(), self.termination.max_evals, seed)?;
        let mut opts = RunOptions::new(self.termination.clone(), seed);
        opts.failure_penalty = self.failure_penalty;
        Ok(FoldRun {
            objective,
            tuner,
            run: TuningRun::new(),
            opts,
            rows: rows.to_vec(),
            seed,
            started: Instant::now(),
            error: None,
        })
    }

    fn step(&self, f: &mut FoldRun, exec: &Executor) -> bool {
        if f.error.is_some() {
            return false;
        }
        match f.run.step(&f.objective, f.tuner.as_mut(), &f.opts, exec) {
            Ok(more) => more,
            Err(e) => {
                f.error = Some(e.into());
                false
            }
        }
    }

    fn finish(&self, f: FoldRun, data: &Dataset) -> Result<TunedModel, NestedError> {
        if let Some(e) = f.error {
            return Err(e);
        }
        let tune_seconds = f.started.elapsed().as_secs_f64();
        let outcome = f.run.finish(f.tuner.as_ref());
        let (config, score) = outcome.incumbent.clone().ok_or(NestedError::NoSuccess)?;
        if outcome.archive.entries().iter().all(|e| e.failed) {
            return Err(NestedError::NoSuccess);
        }
        let inner_estimate = match self.metric.direction() {
            Direction::Minimize => score,
            Direction::Maximize => -score,
        };
        let params = self.space.transform(&config);
        let t = Instant::now();
        let model = self.learner.train(&data.subset(&f.rows), &params, rng::derive_seed(f.seed, &[rng::label::REFIT]))?;
        Ok(TunedModel {
            config,
            params,
            inner_estimate,
            outcome,
            inner_plan: f.objective.plan,
            model,
            tune_seconds,
            refit_seconds: t.elapsed().as_secs_f64(),
        })
    }

    /// Tunes on `rows` of `data` with the inner resampling, then refits on
    /// all of `rows` with the chosen configuration.
    pub fn tune(&self, data: &Arc<Dataset>, rows: &[usize], seed: u64, exec: &Executor) -> Result<TunedModel, NestedError> {
        let mut f = self.start(data, rows, seed)?;
        while self.step(&mut f, exec) {}
        self.finish(f, data)
    }
}

impl Learner for TunedLearner {
    fn id(&self) -> String {
        format!("tuned({})", self.learner.id())
    }

    /// Nothing left to tune from outside.
    fn space(&self) -> SearchSpace {
        SearchSpace::new(Vec::new()).expect("empty space is valid")
    }

    fn capabilities(&self) -> Capabilities {
        self.learner.capabilities()
    }

    fn fit(&self, data: &Dataset, _params: &Params, seed: u64) -> Result<Box<dyn Predictor>, LearnError> {
        let data = Arc::new(data.clone());
        let rows: Vec<usize> = (0..data.n()).collect();
        self.tune(&data, &rows, seed, &Executor::sequential())
            .map(|m| Box::new(m) as Box<dyn Predictor>)
            .map_err(|e| LearnError::Degenerate(e.to_string()))
    }
}

#[derive(Clone, Debug, Default)]
pub struct NestedOptions {
    /// Also tune once on the complete data to report a single configuration.
    pub final_tuning: bool,
}

fn outer_score(model: &TunedModel, data: &Dataset, split: &Split, metric: &Metric) -> Result<Option<f64>, NestedError> {
    let test = data.subset(&split.test);
    let pred = model.model.predict(&test)?;
    match metric.score(test.target(), &pred) {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::Undefined { .. }) => Ok(None),
        Err(e) => Err(NestedError::Learn(e.into())),
    }
}

/// Nested resampling: for every outer split, tune on its training rows,
/// refit there, and score once on its test rows. Outer split `b` is tuned
/// with a seed derived from `(seed, b)`, so results do not depend on the
/// executor. Failures are reported per split; the other splits still run.
pub fn nested_evaluate(
    tl: &TunedLearner,
    data: &Arc<Dataset>,
    outer: &ResamplingPlan,
    seed: u64,
    exec: &Executor,
    options: &NestedOptions,
) -> NestedReport {
    let started = Instant::now();
    let fold_seed = |b: usize| rng::derive_seed(seed, &[rng::label::OUTER, b as u64]);
    let start = |b: usize| -> Result<FoldRun, NestedError> {
        let split = &outer.splits()[b];
        let f = tl.start(data, &split.train, fold_seed(b))?;
        if let Err(e) = check_containment(&f.objective.plan, split) {
            panic!("leakage guard: {e}");
        }
        Ok(f)
    };
    let complete = |b: usize, f: Result<FoldRun, NestedError>| -> FoldReport {
        let split = &outer.splits()[b];
        let result = f.and_then(|f| {
            let m = tl.finish(f, data)?;
            let t = Instant::now();
            let s = outer_score(&m, data, split, &tl.metric)?;
            Ok((m, s, t.elapsed().as_secs_f64()))
        });
        match result {
            Ok((m, score, eval_seconds)) => FoldReport::success(b, &m, score, eval_seconds),
            Err(e) => FoldReport::failure(b, NestedError::Fold { fold: b, source: Box::new(e) }.to_string()),
        }
    };
    let folds: Vec<usize> = (0..outer.len()).collect();

    let reports: Vec<FoldReport> = match exec.level() {
        Level::Batch => {
            let runs: Vec<Mutex<Option<Result<FoldRun, NestedError>>>> =
                folds.iter().map(|&b| Mutex::new(Some(start(b)))).collect();
            let mut active: Vec<usize> = folds.iter().copied().filter(|&b| matches!(&*runs[b].lock().unwrap(), Some(Ok(_)))).collect();
            while !active.is_empty() {
                let more = exec.map(Level::Batch, &active, |&b| match runs[b].lock().unwrap().as_mut() {
                    Some(Ok(f)) => tl.step(f, exec),
                    _ => false,
                });
                active = active.into_iter().zip(more).filter(|(_, m)| matches!(m, Ok(true))).map(|(b, _)| b).collect();
            }
            runs.into_iter()
                .enumerate()
                .map(|(b, m)| complete(b, m.into_inner().unwrap().expect("fold state present")))
                .collect()
        }
        Level::Outer => exec
            .map(Level::Outer, &folds, |&b| {
                complete(
                    b,
                    start(b).map(|mut f| {
                        while tl.step(&mut f, exec) {}
                        f
                    }),
                )
            })
            .into_iter()
            .enumerate()
            .map(|(b, r)| r.unwrap_or_else(|e| FoldReport::failure(b, e)))
            .collect(),
        _ => folds
            .iter()
            .map(|&b| {
                complete(
                    b,
                    start(b).map(|mut f| {
                        while tl.step(&mut f, exec) {}
                        f
                    }),
                )
            })
            .collect(),
    };

    let final_config = options.final_tuning.then(|| {
        let rows: Vec<usize> = (0..data.n()).collect();
        tl.tune(data, &rows, rng::derive_seed(seed, &[rng::label::OUTER, u64::MAX]), exec).ok().map(|m| m.config)
    });
    NestedReport::new(tl, reports, final_config.flatten(), exec, started.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_holdout, make_kfold, synth};
    use crate::learn::{FeaturelessRandom, Knn};
    use crate::space::ParamSpec;
    use crate::tuners::{EsSettings, RandomSettings};

    fn random_label_setup(evals: usize) -> (TunedLearner, Arc<Dataset>) {
        let tl = TunedLearner::new(
            Arc::new(FeaturelessRandom),
            TunerSpec::Random(RandomSettings::default()),
            ResamplingSpec::holdout(2.0 / 3.0),
            Metric::Ce,
            Termination::evals(evals),
        );
        (tl, Arc::new(synth::random_labels(60, 2, 3)))
    }

    #[test]
    fn inner_splits_stay_in_outer_train() {
        let (tl, d) = random_label_setup(5);
        let outer = make_kfold(60, 3, 1, Some(d.target()), &mut rng::stream(1, &[])).unwrap();
        for s in outer.splits() {
            let f = tl.start(&d, &s.train, 1).unwrap();
            check_containment(&f.objective.plan, s).unwrap();
        }
        let bad = Split { train: outer.splits()[0].train.clone(), test: outer.splits()[0].train[..3].to_vec() };
        let f = tl.start(&d, &outer.splits()[0].train, 1).unwrap();
        assert!(check_containment(&f.objective.plan, &bad).is_err());
    }

    #[test]
    fn single_point_space_is_plain_training() {
        let space = SearchSpace::new(Vec::new()).unwrap();
        let tl = TunedLearner::new(
            Arc::new(Knn),
            TunerSpec::Random(RandomSettings::default()),
            ResamplingSpec::cv(3),
            Metric::Ce,
            Termination::evals(3),
        )
        .with_space(space);
        let d = Arc::new(synth::smooth_classification(60, 0.1, 2));
        let rows: Vec<usize> = (0..60).collect();
        let m = tl.tune(&d, &rows, 2, &Executor::sequential()).unwrap();
        assert_eq!(m.config, Config::new());
        assert_eq!(m.model.n_train, 60);
    }

    #[test]
    fn structure_and_level_equivalence() {
        let (tl, d) = random_label_setup(6);
        let outer = make_kfold(60, 3, 1, Some(d.target()), &mut rng::stream(2, &[])).unwrap();
        let base = nested_evaluate(&tl, &d, &outer, 5, &Executor::sequential(), &NestedOptions::default());
        assert_eq!(base.folds.len(), 3);
        assert!(base.folds.iter().all(|f| f.config.is_some() && f.score.is_some()));
        for level in [Level::Outer, Level::Batch, Level::Config, Level::Fold, Level::Combined] {
            let exec = Executor::new(3, level).unwrap();
            let r = nested_evaluate(&tl, &d, &outer, 5, &exec, &NestedOptions::default());
            assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&base).unwrap(), "{level}");
        }
    }

    #[test]
    fn job_counts_per_level() {
        let (tl, d) = random_label_setup(2);
        let outer = make_kfold(60, 10, 1, Some(d.target()), &mut rng::stream(2, &[])).unwrap();
        let exec = Executor::new(10, Level::Outer).unwrap();
        nested_evaluate(&tl, &d, &outer, 1, &exec, &NestedOptions::default());
        assert_eq!(exec.dispatches().len(), 1);
        assert_eq!(exec.dispatches()[0].jobs, 10);

        let space = SearchSpace::new(vec![ParamSpec::integer("k", 1, 20)]).unwrap();
        let tl = TunedLearner::new(
            Arc::new(Knn),
            TunerSpec::Es(EsSettings { mu: 20, lambda: 20, ..EsSettings::default() }),
            ResamplingSpec::cv(3),
            Metric::Ce,
            Termination::evals(60),
        )
        .with_space(space);
        let d = Arc::new(synth::smooth_classification(90, 0.1, 1));
        let outer = make_holdout(90, 2.0 / 3.0, Some(d.target()), &mut rng::stream(2, &[])).unwrap();
        let exec = Executor::new(4, Level::Combined).unwrap();
        nested_evaluate(&tl, &d, &outer, 1, &exec, &NestedOptions::default());
        let jobs: Vec<usize> = exec.dispatches().iter().map(|d| d.jobs).collect();
        assert_eq!(jobs, [60, 60, 60]);
    }

    #[test]
    fn failed_fold_reported_others_kept() {
        let tl = TunedLearner::new(
            Arc::new(Knn),
            TunerSpec::Random(RandomSettings::default()),
            ResamplingSpec::cv(3),
            Metric::Mse,
            Termination::evals(3),
        );
        let d = Arc::new(synth::smooth_classification(30, 0.0, 1));
        let outer = make_kfold(30, 2, 1, None, &mut rng::stream(2, &[])).unwrap();
        let r = nested_evaluate(&tl, &d, &outer, 1, &Executor::sequential(), &NestedOptions::default());
        assert_eq!(r.folds.len(), 2);
        assert!(r.folds.iter().all(|f| f.error.as_deref().is_some_and(|e| e.contains("outer split"))));
    }
}
