use super::racing::{Race, RaceSettings, RaceTest};
use super::{prior_configs, Proposal, Tuner, TunerError};
use crate::objective::{Archive, Entry};
use crate::rng;
use crate::space::{Config, Domain, SearchSpace, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RacingSettings {
    /// Total fold evaluations; defaults to the run's `max_evals`.
    pub budget: Option<usize>,
    /// Number of races; defaults to `floor(2 + log2(dim))`.
    pub n_iter: Option<usize>,
    pub t_first: usize,
    pub t_each: usize,
    pub alpha: f64,
    pub test: RaceTest,
    /// Survivor floor of each race.
    pub n_min: usize,
    /// Most elites carried into the next race.
    pub elites: usize,
    /// Factor applied to the numeric sampling sd after each race.
    pub sd_decay: f64,
    /// Probability mass moved toward the parent's level after each race.
    pub cat_shift: f64,
}

impl Default for RacingSettings {
    fn default() -> Self {
        let r = RaceSettings::default();
        Self {
            budget: None,
            n_iter: None,
            t_first: r.t_first,
            t_each: r.t_each,
            alpha: r.alpha,
            test: r.test,
            n_min: r.n_min,
            elites: 5,
            sd_decay: 0.7,
            cat_shift: 0.3,
        }
    }
}

impl RacingSettings {
    fn race_settings(&self) -> RaceSettings {
        RaceSettings { t_first: self.t_first, t_each: self.t_each, alpha: self.alpha, test: self.test, n_min: self.n_min }
    }
}

/// Parent selection probabilities for elites of rank `1..=n`:
/// `2 (n - r + 1) / (n (n + 1))`.
pub fn parent_probabilities(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (1..=n).map(|r| 2.0 * (nf - r as f64 + 1.0) / (nf * (nf + 1.0))).collect()
}

#[derive(Clone, Debug)]
struct Candidate {
    config: Config,
    /// Fold scores, kept across races for elites (`None` = failed).
    cache: HashMap<usize, Option<f64>>,
}

/// Iterated racing: a sequence of races, each seeded with the previous
/// elites plus children sampled around them from a sampling model that
/// narrows from race to race.
pub struct IteratedRacing {
    space: SearchSpace,
    settings: RacingSettings,
    budget: usize,
    n_iter: usize,
    n_instances: usize,
    rng: rng::Rng,
    iteration: usize,
    used: usize,
    candidates: Vec<Candidate>,
    race: Option<Race>,
    block: std::ops::Range<usize>,
    /// (candidate, position in the fold order) per outstanding proposal.
    pending: Vec<(usize, usize)>,
    elites: Vec<Candidate>,
    best: Option<(Config, f64)>,
    finished: bool,
    seeds: Vec<Config>,
}

impl IteratedRacing {
    pub fn new(space: SearchSpace, settings: RacingSettings, n_instances: usize, seed: u64) -> Result<Self, TunerError> {
        let budget = settings.budget.ok_or_else(|| TunerError::Setting("racing needs an evaluation budget".into()))?;
        if n_instances < settings.t_first.max(1) {
            return Err(TunerError::Setting(format!(
                "racing needs at least t_first = {} objective instances, got {n_instances}",
                settings.t_first
            )));
        }
        let n_iter = settings.n_iter.unwrap_or_else(|| (2.0 + (space.dim().max(1) as f64).log2()).floor() as usize).max(1);
        Ok(Self {
            space,
            settings,
            budget,
            n_iter,
            n_instances,
            rng: rng::stream(seed, &[rng::label::TUNER]),
            iteration: 0,
            used: 0,
            candidates: Vec::new(),
            race: None,
            block: 0..0,
            pending: Vec::new(),
            elites: Vec::new(),
            best: None,
            finished: false,
            seeds: Vec::new(),
        })
    }

    pub fn n_iter(&self) -> usize {
        self.n_iter
    }

    fn truncated_normal(&mut self, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
        for _ in 0..1000 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let x = mean + sd * z;
            if (lo..=hi).contains(&x) {
                return x;
            }
        }
        self.rng.random_range(lo..=hi)
    }

    fn child(&mut self, parent: &Config) -> Config {
        let shrink = self.settings.sd_decay.powi(self.iteration as i32 - 1);
        let shift = 1.0 - (1.0 - self.settings.cat_shift).powi(self.iteration as i32 - 1);
        let mut out = Config::new();
        let specs: Vec<_> = self.space.topological().cloned().collect();
        for spec in specs {
            let v = match (parent.get(&spec.name), &spec.domain) {
                (Some(Value::Real(x)), Domain::Real { lower, upper }) => {
                    let sd = (upper - lower) / 2.0 * shrink;
                    Value::Real(self.truncated_normal(*x, sd, *lower, *upper))
                }
                (Some(Value::Int(x)), Domain::Integer { lower, upper }) => {
                    let (lo, hi) = (*lower as f64, *upper as f64);
                    let sd = (hi - lo) / 2.0 * shrink;
                    Value::Int((self.truncated_normal(*x as f64, sd, lo - 0.5, hi + 0.5).round() as i64).clamp(*lower, *upper))
                }
                (Some(Value::Cat(p)), Domain::Categorical { levels }) => {
                    if self.rng.random::<f64>() < shift {
                        Value::Cat(p.clone())
                    } else {
                        Value::Cat(levels[self.rng.random_range(0..levels.len())].clone())
                    }
                }
                _ => SearchSpace::sample_value(&spec, &mut self.rng),
            };
            out.insert(spec.name.clone(), v);
        }
        self.space.repair(out, &mut self.rng)
    }

    fn finish_race(&mut self) {
        let Some(race) = self.race.take() else { return };
        let ranking = race.ranking();
        if let Some(&top) = ranking.first() {
            self.best = Some((self.candidates[top].config.clone(), race.mean(top)));
        }
        let cands = std::mem::take(&mut self.candidates);
        self.elites = ranking.into_iter().take(self.settings.elites.max(1)).map(|c| cands[c].clone()).collect();
    }

    /// Sets up the next race, or marks the tuner finished.
    fn start_race(&mut self) -> bool {
        if self.iteration >= self.n_iter {
            return false;
        }
        let remaining = self.budget.saturating_sub(self.used);
        let races_left = self.n_iter - self.iteration;
        let r = self.iteration + 1;
        let per_race = remaining / races_left;
        let cost = self.settings.t_first + self.settings.t_each * r.min(5);
        let n_new_min = if self.elites.is_empty() { 2 } else { 1 };
        let n = (per_race / cost.max(1)).max(self.elites.len() + n_new_min);
        if remaining < self.settings.t_first.max(1) * 2 {
            return false;
        }
        self.iteration = r;
        let mut cands: Vec<Candidate> = std::mem::take(&mut self.elites);
        if r == 1 {
            let seeds: Vec<Config> = self.seeds.drain(..).collect();
            cands.extend(seeds.into_iter().map(|config| Candidate { config, cache: HashMap::new() }));
        }
        let parents: Vec<Config> = cands.iter().map(|c| c.config.clone()).collect();
        let probs = parent_probabilities(parents.len());
        while cands.len() < n {
            let config = if parents.is_empty() || r == 1 {
                self.space.sample_uniform(&mut self.rng)
            } else {
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                let mut pick = parents.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                let parent = parents[pick].clone();
                self.child(&parent)
            };
            cands.push(Candidate { config, cache: HashMap::new() });
        }
        let mut folds: Vec<usize> = (0..self.n_instances).collect();
        folds.shuffle(&mut self.rng);
        self.race = Some(Race::new(cands.len(), folds, self.settings.race_settings()).expect("instance count checked"));
        self.candidates = cands;
        true
    }
}

impl Tuner for IteratedRacing {
    fn kind(&self) -> &'static str {
        "racing"
    }

    fn propose(&mut self, _archive: &Archive) -> Result<Vec<Proposal>, TunerError> {
        loop {
            if self.finished {
                return Ok(Vec::new());
            }
            if self.race.as_ref().is_none_or(Race::is_finished) {
                self.finish_race();
                if !self.start_race() {
                    self.finished = true;
                    continue;
                }
            }
            let race = self.race.as_mut().expect("race running");
            let block = race.next_block();
            let mut proposals = Vec::new();
            self.pending.clear();
            for c in 0..self.candidates.len() {
                if !race.is_alive(c) {
                    continue;
                }
                for pos in block.clone() {
                    let fold = race.fold(pos);
                    match self.candidates[c].cache.get(&fold) {
                        Some(&s) => race.record(c, pos, s),
                        None => {
                            self.pending.push((c, pos));
                            proposals.push(Proposal {
                                config: self.candidates[c].config.clone(),
                                fidelity: None,
                                instances: Some(vec![fold]),
                            });
                        }
                    }
                }
            }
            self.block = block.clone();
            if proposals.is_empty() {
                race.complete_block(block);
                continue;
            }
            return Ok(proposals);
        }
    }

    fn observe(&mut self, entries: &[Entry]) {
        let Some(race) = self.race.as_mut() else { return };
        for (e, &(c, pos)) in entries.iter().zip(&self.pending) {
            let s = (!e.failed).then_some(e.score);
            race.record(c, pos, s);
            self.candidates[c].cache.insert(race.fold(pos), s);
        }
        self.used += entries.len();
        if entries.len() >= self.pending.len() {
            self.pending.clear();
            race.complete_block(self.block.clone());
        } else {
            self.pending.drain(..entries.len());
        }
    }

    fn warm_start(&mut self, prior: &Archive, prior_space: &SearchSpace) -> Result<(), TunerError> {
        self.seeds.extend(prior_configs(&self.space, prior, prior_space)?.into_iter().take(1).map(|(c, _)| c));
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.finished
    }

    /// Best survivor of the latest completed race, scored by its mean
    /// over the folds it was raced on; before any race completes, the best
    /// candidate of the running race.
    fn identify(&self, archive: &Archive) -> Option<(Config, f64)> {
        if let Some(b) = &self.best {
            return Some(b.clone());
        }
        if let Some(race) = &self.race {
            if let Some(&top) = race.ranking().first() {
                if race.done > 0 {
                    return Some((self.candidates[top].config.clone(), race.mean(top)));
                }
            }
        }
        archive.incumbent().ok().map(|e| (e.config.clone(), e.score))
    }
}
