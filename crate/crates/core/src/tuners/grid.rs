use super::{prior_configs, Proposal, Tuner, TunerError};
use crate::objective::{Archive, Entry};
use crate::rng;
use crate::space::{Config, SearchSpace};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    /// Points per numeric axis.
    pub resolution: usize,
    pub batch: usize,
    /// Visit the grid in random order (so a truncated budget still covers
    /// the whole range).
    pub shuffle: bool,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { resolution: 5, batch: 10, shuffle: true }
    }
}

/// Cartesian grid, each point proposed exactly once.
pub struct GridSearch {
    points: Vec<Config>,
    next: usize,
    settings: GridSettings,
    space: SearchSpace,
}

impl GridSearch {
    pub fn new(space: SearchSpace, settings: GridSettings, seed: u64) -> Result<Self, TunerError> {
        let mut points = space.grid(settings.resolution)?;
        if settings.shuffle {
            points.shuffle(&mut rng::stream(seed, &[rng::label::TUNER]));
        }
        Ok(Self { points, next: 0, settings, space })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Tuner for GridSearch {
    fn kind(&self) -> &'static str {
        "grid"
    }

    fn propose(&mut self, _archive: &Archive) -> Result<Vec<Proposal>, TunerError> {
        let end = (self.next + self.settings.batch.max(1)).min(self.points.len());
        let out = self.points[self.next..end].iter().cloned().map(Proposal::full).collect();
        self.next = end;
        Ok(out)
    }

    fn observe(&mut self, _entries: &[Entry]) {}

    fn warm_start(&mut self, prior: &Archive, prior_space: &SearchSpace) -> Result<(), TunerError> {
        if let Some((c, _)) = prior_configs(&self.space, prior, prior_space)?.into_iter().next() {
            self.points.retain(|p| *p != c);
            self.points.insert(self.next, c);
        }
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.next >= self.points.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamSpec;

    #[test]
    fn resolution_three_in_two_d_is_nine_then_exhausted() {
        let space = SearchSpace::new(vec![ParamSpec::real("a", 0.0, 1.0), ParamSpec::real("b", 0.0, 1.0)]).unwrap();
        let mut g = GridSearch::new(space, GridSettings { resolution: 3, batch: 4, shuffle: true }, 1).unwrap();
        let a = Archive::new();
        let mut all = Vec::new();
        while !g.is_finished() {
            all.extend(g.propose(&a).unwrap());
        }
        assert_eq!(all.len(), 9);
        assert!(g.propose(&a).unwrap().is_empty());
        let mut keys: Vec<String> = all.iter().map(|p| p.config.to_string()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 9);
    }
}
