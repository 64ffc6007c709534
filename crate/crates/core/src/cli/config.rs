use crate::data::{synth, Dataset, Metric, ResamplingSpec, TaskKind};
use crate::exec::Level;
use crate::learn::{self, Learner};
use crate::objective::{FidelityRange, Objective, ResampledObjective, SyntheticFn, SyntheticObjective};
use crate::rng;
use crate::space::{SearchSpace, SpaceDoc};
use crate::tuners::{Termination, TunerSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::CliError;

/// Where the data or the objective comes from. Exactly one of `dataset`,
/// `bundled` and `synthetic` must be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    /// CSV file with a header row.
    pub dataset: Option<PathBuf>,
    pub target: Option<String>,
    pub kind: Option<TaskKind>,
    /// One of the generated datasets (`separable`, `linear`, `smooth`,
    /// `random_labels`).
    pub bundled: Option<String>,
    pub synthetic: Option<SyntheticFn>,
    /// Gaussian noise on synthetic objectives.
    pub noise_sd: f64,
    /// Noise replicates averaged per synthetic evaluation.
    pub instances: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionConfig {
    pub workers: usize,
    pub level: Level,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self { workers: 1, level: Level::Config }
    }
}

/// A tuning or nested-resampling run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Required, here or via `--seed`.
    pub seed: Option<u64>,
    pub task: TaskConfig,
    /// Learner id, e.g. `knn` or `pipe:impute+standardize+knn`.
    pub learner: Option<String>,
    /// Metric id; defaults to `ce` for classification, `mse` for regression.
    pub metric: Option<String>,
    /// Replaces the learner's preset search space.
    pub space: Option<SpaceDoc>,
    pub tuner: TunerSpec,
    /// Resampling used to score configurations.
    #[serde(default = "default_inner")]
    pub inner: ResamplingSpec,
    /// Outer resampling for `nested`.
    pub outer: Option<ResamplingSpec>,
    pub termination: Termination,
    pub fidelity: Option<FidelityRange>,
    #[serde(default)]
    pub execution: ExecutionConfig,
    pub out: Option<PathBuf>,
    #[serde(default = "default_penalty")]
    pub failure_penalty: f64,
    /// `nested` only: also tune once on all data and report the result.
    #[serde(default)]
    pub final_tuning: bool,
}

fn default_inner() -> ResamplingSpec {
    ResamplingSpec::cv(3)
}

fn default_penalty() -> f64 {
    1.0
}

/// Reads and parses a TOML document; parse errors carry line and column.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// What a run config resolves to.
pub enum Problem {
    Synthetic(SyntheticObjective),
    Data { data: Arc<Dataset>, learner: Arc<dyn Learner>, space: SearchSpace, metric: Metric },
}

fn field(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{name}`: {msg}"))
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let sources = [self.dataset.is_some(), self.bundled.is_some(), self.synthetic.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(field("task", "set exactly one of `dataset`, `bundled`, `synthetic`"));
        }
        if self.dataset.is_some() && self.target.is_none() {
            return Err(field("task.target", "required with `task.dataset`"));
        }
        if let Some(name) = &self.bundled {
            if !synth::BUNDLED.contains(&name.as_str()) {
                return Err(field("task.bundled", format!("unknown dataset `{name}`, expected one of {:?}", synth::BUNDLED)));
            }
        }
        if self.noise_sd < 0.0 {
            return Err(field("task.noise_sd", "must be non-negative"));
        }
        Ok(())
    }

    fn load_data(&self) -> Result<Dataset, CliError> {
        if let Some(name) = &self.bundled {
            return synth::bundled(name)
                .ok_or_else(|| field("task.bundled", format!("unknown dataset `{name}`, expected one of {:?}", synth::BUNDLED)));
        }
        let path = self.dataset.as_ref().expect("validated");
        let file = std::fs::File::open(path).map_err(|e| field("task.dataset", format!("{}: {e}", path.display())))?;
        let kind = self.kind.unwrap_or(TaskKind::Classification);
        Ok(Dataset::from_csv(file, self.target.as_deref().expect("validated"), kind)?)
    }
}

/// Settings shared by run and benchmark configs that define a problem.
pub struct ProblemSpec<'a> {
    pub task: &'a TaskConfig,
    pub learner: Option<&'a str>,
    pub metric: Option<&'a str>,
    pub space: Option<&'a SpaceDoc>,
}

impl ProblemSpec<'_> {
    pub fn validate(&self) -> Result<(), CliError> {
        self.task.validate()?;
        if self.task.synthetic.is_some() {
            if self.learner.is_some() || self.metric.is_some() || self.space.is_some() {
                return Err(field("learner", "synthetic tasks take no learner, metric or space"));
            }
        } else {
            let id = self.learner.ok_or_else(|| field("learner", "required for data tasks"))?;
            learn::by_id(id).map_err(|e| field("learner", e))?;
            if let Some(m) = self.metric {
                Metric::from_id(m).map_err(|e| field("metric", e))?;
            }
            if let Some(s) = self.space {
                s.build().map_err(|e| field("space", e))?;
            }
        }
        Ok(())
    }

    pub fn resolve(&self, fidelity: Option<FidelityRange>) -> Result<Problem, CliError> {
        if let Some(f) = &self.task.synthetic {
            let mut o = SyntheticObjective::new(f.clone());
            if self.task.noise_sd > 0.0 || self.task.instances.is_some() {
                o = o.with_noise(self.task.noise_sd, self.task.instances.unwrap_or(1));
            }
            if let Some(r) = fidelity {
                o = o.with_fidelity(r.lower, r.upper);
            }
            return Ok(Problem::Synthetic(o));
        }
        let data = Arc::new(self.task.load_data()?);
        let learner = learn::by_id(self.learner.expect("validated")).map_err(|e| field("learner", e))?;
        let space = match self.space {
            Some(doc) => doc.build().map_err(|e| field("space", e))?,
            None => learner.space(),
        };
        let metric = match self.metric {
            Some(m) => Metric::from_id(m).map_err(|e| field("metric", e))?,
            None if data.task() == TaskKind::Regression => Metric::Mse,
            None => Metric::Ce,
        };
        if metric.task() != data.task() {
            return Err(field("metric", format!("`{}` does not fit a {:?} task", metric.id(), data.task())));
        }
        Ok(Problem::Data { data, learner, space, metric })
    }
}

/// Builds the tuning objective for `tune`: a synthetic function, or the
/// learner scored by the inner resampling on the whole dataset.
pub fn objective(problem: Problem, inner: &ResamplingSpec, fidelity: Option<FidelityRange>, seed: u64) -> Result<Box<dyn Objective>, CliError> {
    Ok(match problem {
        Problem::Synthetic(o) => Box::new(o),
        Problem::Data { data, learner, space, metric } => {
            let plan = inner.instantiate(data.target(), &mut rng::stream(seed, &[rng::label::INNER_PLAN]))?;
            let mut o = ResampledObjective::new(learner, data, plan, metric).with_space(space);
            if let Some(r) = fidelity {
                o = o.with_fidelity(r.lower, r.upper);
            }
            Box::new(o)
        }
    })
}

impl RunConfig {
    pub fn problem(&self) -> ProblemSpec<'_> {
        ProblemSpec { task: &self.task, learner: self.learner.as_deref(), metric: self.metric.as_deref(), space: self.space.as_ref() }
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<u64, CliError> {
        let seed = self.seed.ok_or_else(|| field("seed", "required (set it in the config or pass --seed)"))?;
        self.problem().validate()?;
        self.termination.validate().map_err(|e| field("termination", e))?;
        if self.execution.workers == 0 {
            return Err(field("execution.workers", "must be at least 1"));
        }
        if let Some(f) = self.fidelity {
            if !(f.lower > 0.0 && f.lower <= f.upper) {
                return Err(field("fidelity", "needs 0 < lower <= upper"));
            }
        }
        if self.failure_penalty < 0.0 {
            return Err(field("failure_penalty", "must be non-negative"));
        }
        Ok(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
learner = "knn"
[task]
bundled = "separable"
[tuner]
kind = "random"
[termination]
max_evals = 20
"#;

    #[test]
    fn minimal_config_parses() {
        let c: RunConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(c.validate().unwrap(), 3);
        assert_eq!(c.inner, ResamplingSpec::cv(3));
        assert_eq!(c.execution, ExecutionConfig::default());
    }

    #[test]
    fn schema_errors_name_the_field() {
        let c: RunConfig = toml::from_str(&MINIMAL.replace("seed = 3", "")).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("`seed`"));
        let e = toml::from_str::<RunConfig>(&MINIMAL.replace("max_evals", "max_eval")).unwrap_err();
        assert!(e.to_string().contains("max_eval"), "{e}");
        let c: RunConfig = toml::from_str(&MINIMAL.replace("bundled = \"separable\"", "bundled = \"x\"\nsynthetic = { function = \"branin\" }")).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("`task`"));
    }
}
