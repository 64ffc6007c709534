use super::{prior_configs, Proposal, Tuner, TunerError};
use crate::objective::{Archive, Entry, FidelityRange};
use crate::rng;
use crate::space::{Config, SearchSpace};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperbandSettings {
    pub eta: f64,
    /// Full passes over all brackets; `None` repeats until the budget
    /// runs out.
    pub repetitions: Option<usize>,
}

impl Default for HyperbandSettings {
    fn default() -> Self {
        Self { eta: 3.0, repetitions: Some(1) }
    }
}

/// One successive-halving stage: `n` configurations at `fidelity`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage {
    pub n: usize,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    pub s: usize,
    pub stages: Vec<Stage>,
    /// Fidelity budget per bracket, `(s_max + 1) * upper`.
    pub budget: f64,
}

impl Bracket {
    pub fn spend(&self) -> f64 {
        self.stages.iter().map(|t| t.n as f64 * t.fidelity).sum()
    }
}

/// Largest `s` with `lower * eta^s <= upper`.
fn s_max(lower: f64, upper: f64, eta: f64) -> usize {
    let mut s = 0;
    while lower * eta.powi(s as i32 + 1) <= upper * (1.0 + 1e-12) {
        s += 1;
    }
    s
}

/// Bracket design, most explorative bracket first. Bracket `s` starts
/// `ceil((s_max+1)/(s+1) * eta^s)` configurations at `upper * eta^-s`;
/// stage `t` keeps `floor(p * eta^-t)` of them at `upper * eta^(t-s)`.
pub fn bracket_schedule(range: FidelityRange, eta: f64) -> Result<Vec<Bracket>, TunerError> {
    if !(eta > 1.0) || !(range.upper > eta) || !(range.lower > 0.0) || range.lower > range.upper {
        return Err(TunerError::Setting(format!(
            "hyperband needs eta > 1, upper > eta and 0 < lower <= upper (eta {eta}, range [{}, {}])",
            range.lower, range.upper
        )));
    }
    let sm = s_max(range.lower, range.upper, eta);
    let budget = (sm + 1) as f64 * range.upper;
    Ok((0..=sm)
        .rev()
        .map(|s| {
            let p = ((sm + 1) as f64 / (s + 1) as f64 * eta.powi(s as i32) - 1e-9).ceil() as usize;
            let mut n = p;
            let stages = (0..=s)
                .map(|t| {
                    let st = Stage { n, fidelity: range.upper * eta.powi(t as i32 - s as i32) };
                    n = (n as f64 / eta + 1e-9).floor() as usize;
                    st
                })
                .collect();
            Bracket { s, stages, budget }
        })
        .collect())
}

/// Checks the per-bracket budget law `sum_t floor(p eta^-t) r0 eta^t <= B`
/// in exact integer arithmetic (all fidelities scaled by `eta^s`).
pub fn satisfies_budget_law(upper: u64, eta: u64) -> bool {
    let range = FidelityRange { lower: 1.0, upper: upper as f64 };
    let Ok(brackets) = bracket_schedule(range, eta as f64) else { return false };
    let sm = brackets[0].s as u32;
    brackets.iter().all(|b| {
        let scale = eta.pow(b.s as u32);
        let p = (sm as u64 + 1) * scale;
        let p0 = p.div_ceil(b.s as u64 + 1);
        // fidelity of stage t times eta^s is upper * eta^t
        let spend: u64 = (0..=b.s as u32).map(|t| (p0 / eta.pow(t)) * upper * eta.pow(t)).sum();
        let stages_match = b.stages.iter().enumerate().all(|(t, st)| st.n as u64 == p0 / eta.pow(t as u32));
        stages_match && spend <= (sm as u64 + 1) * upper * scale
    })
}

/// Hyperband over uniformly sampled configurations, with successive
/// halving inside each bracket. Survivors are the best `floor(n / eta)` by
/// score, ties to the earlier evaluation.
pub struct Hyperband {
    space: SearchSpace,
    settings: HyperbandSettings,
    brackets: Vec<Bracket>,
    rng: rng::Rng,
    bracket: usize,
    stage: usize,
    pass: usize,
    population: Vec<Config>,
    results: Vec<(Config, f64, usize)>,
    awaiting: usize,
    seeds: Vec<Config>,
}

impl Hyperband {
    pub fn new(space: SearchSpace, settings: HyperbandSettings, range: FidelityRange, seed: u64) -> Result<Self, TunerError> {
        let brackets = bracket_schedule(range, settings.eta)?;
        Ok(Self {
            space,
            settings,
            brackets,
            rng: rng::stream(seed, &[rng::label::TUNER]),
            bracket: 0,
            stage: 0,
            pass: 0,
            population: Vec::new(),
            results: Vec::new(),
            awaiting: 0,
            seeds: Vec::new(),
        })
    }

    pub fn brackets(&self) -> &[Bracket] {
        &self.brackets
    }

    fn advance_bracket(&mut self) {
        self.stage = 0;
        self.population.clear();
        self.bracket += 1;
        if self.bracket == self.brackets.len() {
            self.bracket = 0;
            self.pass += 1;
        }
    }
}

impl Tuner for Hyperband {
    fn kind(&self) -> &'static str {
        "hyperband"
    }

    fn propose(&mut self, _archive: &Archive) -> Result<Vec<Proposal>, TunerError> {
        if self.is_finished() {
            return Ok(Vec::new());
        }
        let b = &self.brackets[self.bracket];
        let st = b.stages[self.stage];
        if self.stage == 0 {
            let mut pop: Vec<Config> = self.seeds.drain(..).take(st.n).collect();
            while pop.len() < st.n {
                pop.push(self.space.sample_uniform(&mut self.rng));
            }
            self.population = pop;
        }
        self.results.clear();
        self.awaiting = self.population.len();
        Ok(self
            .population
            .iter()
            .map(|c| Proposal { config: c.clone(), fidelity: Some(st.fidelity), instances: None })
            .collect())
    }

    fn observe(&mut self, entries: &[Entry]) {
        for e in entries {
            self.results.push((e.config.clone(), e.score, e.index));
        }
        if self.results.len() < self.awaiting {
            return;
        }
        let b = &self.brackets[self.bracket];
        if self.stage + 1 == b.stages.len() {
            self.advance_bracket();
            return;
        }
        let keep = (self.results.len() as f64 / self.settings.eta + 1e-9).floor() as usize;
        let mut ranked = std::mem::take(&mut self.results);
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)));
        self.population = ranked.into_iter().take(keep).map(|r| r.0).collect();
        self.stage += 1;
        if self.population.is_empty() {
            self.advance_bracket();
        }
    }

    fn warm_start(&mut self, prior: &Archive, prior_space: &SearchSpace) -> Result<(), TunerError> {
        self.seeds.extend(prior_configs(&self.space, prior, prior_space)?.into_iter().take(1).map(|(c, _)| c));
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.settings.repetitions.is_some_and(|r| self.pass >= r)
    }
}
