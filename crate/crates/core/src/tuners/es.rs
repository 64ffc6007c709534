use super::{prior_configs, Proposal, Tuner, TunerError};
use crate::objective::{Archive, Entry};
use crate::rng;
use crate::space::{Config, Domain, SearchSpace, Value};
use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsSettings {
    /// Population size.
    pub mu: usize,
    /// Offspring per generation.
    pub lambda: usize,
    pub tournament: usize,
    /// Probability of uniform crossover (otherwise the first parent is
    /// copied).
    pub p_cx: f64,
    /// Gaussian mutation sd of real parameters as a fraction of the range.
    pub sigma: f64,
    /// Probability of resampling a categorical parameter.
    pub p_cat: f64,
}

impl Default for EsSettings {
    fn default() -> Self {
        Self { mu: 10, lambda: 10, tournament: 2, p_cx: 0.7, sigma: 0.1, p_cat: 0.1 }
    }
}

#[derive(Clone, Debug)]
struct Individual {
    config: Config,
    score: f64,
    index: usize,
}

/// (mu + lambda) evolution strategy for mixed spaces.
pub struct EvolutionStrategy {
    space: SearchSpace,
    settings: EsSettings,
    rng: rng::Rng,
    population: Vec<Individual>,
    initialized: bool,
    seeds: Vec<Config>,
}

impl EvolutionStrategy {
    pub fn new(space: SearchSpace, settings: EsSettings, seed: u64) -> Result<Self, TunerError> {
        if settings.mu == 0 || settings.lambda == 0 || settings.tournament == 0 {
            return Err(TunerError::Setting("es needs mu, lambda and tournament >= 1".into()));
        }
        Ok(Self {
            space,
            settings,
            rng: rng::stream(seed, &[rng::label::TUNER]),
            population: Vec::new(),
            initialized: false,
            seeds: Vec::new(),
        })
    }

    pub fn population(&self) -> Vec<(&Config, f64)> {
        self.population.iter().map(|i| (&i.config, i.score)).collect()
    }

    fn tournament(&mut self) -> &Individual {
        let n = self.population.len();
        let mut best = self.rng.random_range(0..n);
        for _ in 1..self.settings.tournament {
            let c = self.rng.random_range(0..n);
            if better(&self.population[c], &self.population[best]) {
                best = c;
            }
        }
        &self.population[best]
    }

    fn offspring(&mut self) -> Config {
        let a = self.tournament().config.clone();
        let b = self.tournament().config.clone();
        let mut child = Config::new();
        let cross = self.rng.random::<f64>() < self.settings.p_cx;
        for spec in self.space.specs() {
            let pick = if cross && self.rng.random::<bool>() { b.get(&spec.name).or(a.get(&spec.name)) } else { a.get(&spec.name).or(b.get(&spec.name)) };
            if let Some(v) = pick {
                child.insert(spec.name.clone(), v.clone());
            }
        }
        let mut mutated = Config::new();
        for (name, v) in child.iter() {
            let spec = self.space.spec(name).expect("child names come from the space");
            let nv = mutate(&spec.domain, v, &self.settings, &mut self.rng);
            mutated.insert(name, nv);
        }
        self.space.repair(mutated, &mut self.rng)
    }
}

fn better(a: &Individual, b: &Individual) -> bool {
    a.score < b.score || (a.score == b.score && a.index < b.index)
}

fn mutate(domain: &Domain, v: &Value, s: &EsSettings, rng: &mut rng::Rng) -> Value {
    match (domain, v) {
        (Domain::Real { lower, upper }, Value::Real(x)) => {
            let z: f64 = StandardNormal.sample(rng);
            Value::Real((x + z * s.sigma * (upper - lower)).clamp(*lower, *upper))
        }
        (Domain::Integer { lower, upper }, Value::Int(x)) => {
            // difference of two geometric draws: symmetric, integer steps,
            // mean absolute step about sigma * range
            let mean = (s.sigma * (upper - lower) as f64).max(0.5);
            let g = Geometric::new(1.0 / (1.0 + mean)).expect("p in (0, 1]");
            let step = g.sample(rng) as i64 - g.sample(rng) as i64;
            Value::Int((x + step).clamp(*lower, *upper))
        }
        (Domain::Categorical { levels }, Value::Cat(_)) if rng.random::<f64>() < s.p_cat => {
            Value::Cat(levels[rng.random_range(0..levels.len())].clone())
        }
        _ => v.clone(),
    }
}

impl Tuner for EvolutionStrategy {
    fn kind(&self) -> &'static str {
        "es"
    }

    fn propose(&mut self, archive: &Archive) -> Result<Vec<Proposal>, TunerError> {
        if !self.initialized {
            let mut out: Vec<Config> = self.seeds.drain(..).take(self.settings.mu).collect();
            while out.len() < self.settings.mu {
                out.push(self.space.sample_uniform(&mut self.rng));
            }
            return Ok(out.into_iter().map(Proposal::full).collect());
        }
        if self.population.is_empty() {
            // every initial evaluation failed; start over
            self.initialized = false;
            return self.propose(archive);
        }
        Ok((0..self.settings.lambda).map(|_| Proposal::full(self.offspring())).collect())
    }

    fn observe(&mut self, entries: &[Entry]) {
        self.initialized = true;
        self.population.extend(
            entries.iter().filter(|e| !e.failed).map(|e| Individual { config: e.config.clone(), score: e.score, index: e.index }),
        );
        self.population.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
        self.population.truncate(self.settings.mu);
    }

    fn warm_start(&mut self, prior: &Archive, prior_space: &SearchSpace) -> Result<(), TunerError> {
        let top = prior_configs(&self.space, prior, prior_space)?;
        self.seeds = top.into_iter().take(self.settings.mu).map(|(c, _)| c).collect();
        Ok(())
    }
}
