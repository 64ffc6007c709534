//! Hyperparameter tuners behind a common propose/observe interface.
//!
//! A tuner proposes a batch of configurations (optionally with a fidelity
//! and a subset of objective instances), the driver evaluates the batch and
//! appends the results to the archive in index order, and the tuner then
//! observes exactly those entries.

pub mod acquisition;
mod bo;
mod driver;
mod es;
pub mod gp;
mod grid;
mod hyperband;
mod irace;
pub mod racing;
mod random;
mod termination;

pub use bo::{AcquisitionKind, BayesOpt, BoSettings};
pub use driver::{evaluate_batch, run, RunOptions, RunOutcome, TuningRun};
pub use es::{EsSettings, EvolutionStrategy};
pub use grid::{GridSearch, GridSettings};
pub use hyperband::{bracket_schedule, satisfies_budget_law, Bracket, Hyperband, HyperbandSettings, Stage};
pub use irace::{parent_probabilities, IteratedRacing, RacingSettings};
pub use random::{RandomSearch, RandomSettings};
pub use termination::{Stagnation, StopReason, Termination};

use crate::objective::{Archive, Entry, FidelityRange};
use crate::space::{Config, SearchSpace, SpaceError};
use serde::{Deserialize, Serialize};

/// A configuration to evaluate next.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub config: Config,
    /// `None` means full fidelity.
    pub fidelity: Option<f64>,
    /// `None` means every instance of the objective.
    pub instances: Option<Vec<usize>>,
}

impl Proposal {
    pub fn full(config: Config) -> Self {
        Self { config, fidelity: None, instances: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TunerError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("{0}")]
    Setting(String),
    #[error("archive: {0}")]
    Archive(#[from] crate::objective::ArchiveError),
}

pub trait Tuner: Send {
    fn kind(&self) -> &'static str;

    /// Next batch. An empty batch means the tuner has nothing left to
    /// propose.
    fn propose(&mut self, archive: &Archive) -> Result<Vec<Proposal>, TunerError>;

    /// Entries produced from the last batch, in evaluation-index order.
    fn observe(&mut self, entries: &[Entry]);

    /// Seeds the tuner with a prior archive over a compatible space.
    fn warm_start(&mut self, prior: &Archive, prior_space: &SearchSpace) -> Result<(), TunerError>;

    fn is_finished(&self) -> bool {
        false
    }

    /// Largest expected improvement seen by the last proposal, for
    /// model-based tuners.
    fn max_ei(&self) -> Option<f64> {
        None
    }

    /// Identification step: the returned configuration and its score.
    fn identify(&self, archive: &Archive) -> Option<(Config, f64)> {
        archive.incumbent().ok().map(|e| (e.config.clone(), e.score))
    }
}

/// Successful prior entries, best first (ties to the earlier index), after
/// checking that the prior space matches `space`.
pub(crate) fn prior_configs(
    space: &SearchSpace,
    prior: &Archive,
    prior_space: &SearchSpace,
) -> Result<Vec<(Config, f64)>, TunerError> {
    space.compatible_with(prior_space)?;
    let mut ok: Vec<&Entry> = prior.entries().iter().filter(|e| !e.failed).collect();
    ok.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
    ok.into_iter()
        .map(|e| {
            space.check(&e.config)?;
            Ok((e.config.clone(), e.score))
        })
        .collect()
}

/// Tuner choice and constants as they appear in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TunerSpec {
    Grid(GridSettings),
    Random(RandomSettings),
    Es(EsSettings),
    Bo(BoSettings),
    Hyperband(HyperbandSettings),
    Racing(RacingSettings),
}

impl TunerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TunerSpec::Grid(_) => "grid",
            TunerSpec::Random(_) => "random",
            TunerSpec::Es(_) => "es",
            TunerSpec::Bo(_) => "bo",
            TunerSpec::Hyperband(_) => "hyperband",
            TunerSpec::Racing(_) => "racing",
        }
    }

    /// Builds the tuner for an objective with the given space, fidelity
    /// range and instance count. `max_evals` is the evaluation budget from
    /// the termination stack, which racing needs to plan its races.
    pub fn build(
        &self,
        space: &SearchSpace,
        fidelity: Option<FidelityRange>,
        n_instances: usize,
        max_evals: Option<usize>,
        seed: u64,
    ) -> Result<Box<dyn Tuner>, TunerError> {
        Ok(match self {
            TunerSpec::Grid(s) => Box::new(GridSearch::new(space.clone(), s.clone(), seed)?),
            TunerSpec::Random(s) => Box::new(RandomSearch::new(space.clone(), s.clone(), seed)),
            TunerSpec::Es(s) => Box::new(EvolutionStrategy::new(space.clone(), s.clone(), seed)?),
            TunerSpec::Bo(s) => Box::new(BayesOpt::new(space.clone(), s.clone(), seed)?),
            TunerSpec::Hyperband(s) => {
                let range = fidelity.ok_or_else(|| TunerError::Setting("hyperband needs an objective with a fidelity range".into()))?;
                Box::new(Hyperband::new(space.clone(), s.clone(), range, seed)?)
            }
            TunerSpec::Racing(s) => {
                let mut s = s.clone();
                if s.budget.is_none() {
                    s.budget = max_evals;
                }
                Box::new(IteratedRacing::new(space.clone(), s, n_instances, seed)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parses_with_defaults() {
        let s: TunerSpec = toml::from_str("kind = \"es\"\nmu = 4").unwrap();
        let TunerSpec::Es(es) = &s else { panic!() };
        assert_eq!((es.mu, es.lambda, es.p_cx), (4, EsSettings::default().lambda, 0.7));
        assert!(toml::from_str::<TunerSpec>("kind = \"es\"\nmu_typo = 4").is_err());
        let s: TunerSpec = toml::from_str("kind = \"hyperband\"\neta = 2").unwrap();
        assert_eq!(s.kind(), "hyperband");
    }
}
