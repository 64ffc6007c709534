use super::{prior_configs, Proposal, Tuner, TunerError};
use crate::objective::{Archive, Entry};
use crate::rng;
use crate::space::{Config, SearchSpace};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSettings {
    /// Configurations per batch.
    pub batch: usize,
}

impl Default for RandomSettings {
    fn default() -> Self {
        Self { batch: 10 }
    }
}

/// Uniform sampling from the search space, conditions respected.
pub struct RandomSearch {
    space: SearchSpace,
    settings: RandomSettings,
    rng: rng::Rng,
    pending: Vec<Config>,
}

impl RandomSearch {
    pub fn new(space: SearchSpace, settings: RandomSettings, seed: u64) -> Self {
        Self { space, settings, rng: rng::stream(seed, &[rng::label::TUNER]), pending: Vec::new() }
    }
}

impl Tuner for RandomSearch {
    fn kind(&self) -> &'static str {
        "random"
    }

    fn propose(&mut self, _archive: &Archive) -> Result<Vec<Proposal>, TunerError> {
        let n = self.settings.batch.max(1);
        let mut out: Vec<Proposal> = self.pending.drain(..).map(Proposal::full).collect();
        while out.len() < n {
            out.push(Proposal::full(self.space.sample_uniform(&mut self.rng)));
        }
        Ok(out)
    }

    fn observe(&mut self, _entries: &[Entry]) {}

    fn warm_start(&mut self, prior: &Archive, prior_space: &SearchSpace) -> Result<(), TunerError> {
        self.pending.extend(prior_configs(&self.space, prior, prior_space)?.into_iter().take(1).map(|(c, _)| c));
        Ok(())
    }
}
