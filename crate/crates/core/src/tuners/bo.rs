use super::acquisition::{expected_improvement, lcb_utility, qlcb_kappas};
use super::gp::{Gp, GpOptions, NoiseMode};
use super::{prior_configs, Proposal, Tuner, TunerError};
use crate::objective::{Archive, Entry};
use crate::rng;
use crate::space::{Config, Domain, SearchSpace, Value};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    #[default]
    Ei,
    Lcb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoSettings {
    /// Uniform initial design size; `None` means 4 times the number of
    /// parameters.
    pub init_design: Option<usize>,
    /// Acquisition for single-point proposals. Batches larger than one
    /// always use LCB with an Exp(1) weight per slot.
    pub acquisition: AcquisitionKind,
    pub kappa: f64,
    pub batch: usize,
    /// Random candidates scored per proposal.
    pub candidates: usize,
    /// Best candidates refined by local perturbation.
    pub refine_top: usize,
    pub refine_steps: usize,
    /// Perturbation sd as a fraction of each numeric range.
    pub refine_sigma: f64,
    pub gp_restarts: usize,
    /// Fit a noise term (otherwise the GP interpolates).
    pub noisy: bool,
}

impl Default for BoSettings {
    fn default() -> Self {
        Self {
            init_design: None,
            acquisition: AcquisitionKind::Ei,
            kappa: 1.0,
            batch: 1,
            candidates: 1000,
            refine_top: 5,
            refine_steps: 20,
            refine_sigma: 0.05,
            gp_restarts: 10,
            noisy: true,
        }
    }
}

/// Gaussian-process Bayesian optimization.
pub struct BayesOpt {
    space: SearchSpace,
    settings: BoSettings,
    rng: rng::Rng,
    /// Successful observations (and warm-start priors) the model is fit to.
    data: Vec<(Vec<f64>, f64)>,
    /// Encodings of everything evaluated, for duplicate detection.
    seen: Vec<Vec<f64>>,
    max_ei: Option<f64>,
    fallbacks: usize,
}

impl BayesOpt {
    pub fn new(space: SearchSpace, settings: BoSettings, seed: u64) -> Result<Self, TunerError> {
        if settings.batch == 0 || settings.candidates == 0 {
            return Err(TunerError::Setting("bo needs batch and candidates >= 1".into()));
        }
        Ok(Self { space, settings, rng: rng::stream(seed, &[rng::label::TUNER]), data: Vec::new(), seen: Vec::new(), max_ei: None, fallbacks: 0 })
    }

    pub fn init_size(&self) -> usize {
        self.settings.init_design.unwrap_or(4 * self.space.dim()).max(2)
    }

    /// Proposals that fell back to uniform sampling after a surrogate
    /// failure.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    fn encode(&self, c: &Config) -> Vec<f64> {
        self.space.encode(c).expect("tuner configurations are valid")
    }

    fn is_duplicate(&self, e: &[f64], extra: &[Vec<f64>]) -> bool {
        self.seen.iter().chain(extra).any(|s| s.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < 1e-9)
    }

    fn perturb(&mut self, c: &Config) -> Config {
        let mut out = Config::new();
        for (name, v) in c.iter() {
            let spec = self.space.spec(name).expect("names come from the space");
            let nv = match (&spec.domain, v) {
                (Domain::Real { lower, upper }, Value::Real(x)) => {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    Value::Real((x + z * self.settings.refine_sigma * (upper - lower)).clamp(*lower, *upper))
                }
                (Domain::Integer { lower, upper }, Value::Int(x)) => {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    let step = (z * self.settings.refine_sigma * (upper - lower) as f64).round() as i64;
                    Value::Int((x + step).clamp(*lower, *upper))
                }
                (Domain::Categorical { levels }, _) if self.rng.random::<f64>() < 0.1 => {
                    Value::Cat(levels[self.rng.random_range(0..levels.len())].clone())
                }
                _ => v.clone(),
            };
            out.insert(name, nv);
        }
        self.space.repair(out, &mut self.rng)
    }

    fn uniform(&mut self, n: usize) -> Vec<Proposal> {
        (0..n).map(|_| Proposal::full(self.space.sample_uniform(&mut self.rng))).collect()
    }

    fn model_proposals(&mut self, gp: &Gp) -> Vec<Proposal> {
        let c_min = self.data.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        let cands: Vec<Config> = (0..self.settings.candidates).map(|_| self.space.sample_uniform(&mut self.rng)).collect();
        let preds: Vec<(f64, f64)> = cands.iter().map(|c| gp.predict(&self.encode(c))).collect();
        self.max_ei = preds.iter().map(|&(m, s)| expected_improvement(m, s, c_min)).reduce(f64::max);

        let q = self.settings.batch;
        let kappas = if q > 1 { qlcb_kappas(q, &mut self.rng) } else { vec![self.settings.kappa] };
        let single_ei = q == 1 && self.settings.acquisition == AcquisitionKind::Ei;
        let mut chosen: Vec<Vec<f64>> = Vec::new();
        let mut out = Vec::with_capacity(q);
        for kappa in kappas {
            let utility = |p: (f64, f64)| if single_ei { expected_improvement(p.0, p.1, c_min) } else { lcb_utility(p.0, p.1, kappa) };
            let mut order: Vec<usize> = (0..cands.len()).collect();
            order.sort_by(|&a, &b| utility(preds[b]).total_cmp(&utility(preds[a])).then(a.cmp(&b)));
            let mut best: Option<(f64, Config)> = None;
            for &i in order.iter().take(self.settings.refine_top.max(1)) {
                let mut cur = cands[i].clone();
                let mut u = utility(preds[i]);
                for _ in 0..self.settings.refine_steps {
                    let next = self.perturb(&cur);
                    let un = utility(gp.predict(&self.encode(&next)));
                    if un > u {
                        cur = next;
                        u = un;
                    }
                }
                if best.as_ref().is_none_or(|(b, _)| u > *b) {
                    best = Some((u, cur));
                }
            }
            let (_, mut cfg) = best.expect("at least one candidate");
            if self.is_duplicate(&self.encode(&cfg), &chosen) {
                cfg = self.space.sample_uniform(&mut self.rng);
            }
            chosen.push(self.encode(&cfg));
            out.push(Proposal::full(cfg));
        }
        out
    }
}

impl Tuner for BayesOpt {
    fn kind(&self) -> &'static str {
        "bo"
    }

    fn propose(&mut self, _archive: &Archive) -> Result<Vec<Proposal>, TunerError> {
        let init = self.init_size();
        if self.data.len() < init {
            return Ok(self.uniform(init - self.data.len()));
        }
        let (x, y): (Vec<Vec<f64>>, Vec<f64>) = self.data.iter().cloned().unzip();
        let opts = GpOptions {
            restarts: self.settings.gp_restarts,
            noise: if self.settings.noisy { NoiseMode::Estimated } else { NoiseMode::Noiseless },
            ..GpOptions::default()
        };
        match Gp::fit(x, &y, &opts, &mut self.rng) {
            Ok(gp) => Ok(self.model_proposals(&gp)),
            Err(e) => {
                log::warn!("surrogate fit failed ({e}); proposing uniformly");
                self.fallbacks += 1;
                Ok(self.uniform(self.settings.batch))
            }
        }
    }

    fn observe(&mut self, entries: &[Entry]) {
        for e in entries {
            let enc = self.encode(&e.config);
            if !e.failed {
                self.data.push((enc.clone(), e.score));
            }
            self.seen.push(enc);
        }
    }

    fn warm_start(&mut self, prior: &Archive, prior_space: &SearchSpace) -> Result<(), TunerError> {
        for (c, s) in prior_configs(&self.space, prior, prior_space)? {
            let enc = self.encode(&c);
            self.data.push((enc.clone(), s));
            self.seen.push(enc);
        }
        Ok(())
    }

    fn max_ei(&self) -> Option<f64> {
        self.max_ei
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{SyntheticFn, SyntheticObjective};
    use crate::tuners::{run, RunOptions, Termination};
    use crate::exec::Executor;
    use crate::objective::Objective;

    #[test]
    fn bootstrap_then_batch_of_distinct_points() {
        let obj = SyntheticObjective::new(SyntheticFn::Branin);
        let mut bo = BayesOpt::new(obj.space().clone(), BoSettings { batch: 3, gp_restarts: 2, candidates: 200, ..BoSettings::default() }, 4).unwrap();
        let first = bo.propose(&Archive::new()).unwrap();
        assert_eq!(first.len(), 8);
        let out = run(&obj, &mut bo, &RunOptions::new(Termination::evals(14), 4), &Executor::sequential()).unwrap();
        assert_eq!(out.archive.len(), 14);
        let batch: Vec<_> = out.archive.entries()[8..11].iter().map(|e| e.config.to_string()).collect();
        assert!(batch[0] != batch[1] && batch[1] != batch[2] && batch[0] != batch[2]);
        assert!(bo.max_ei().is_some());
    }

    #[test]
    fn warm_start_skips_bootstrap() {
        let obj = SyntheticObjective::new(SyntheticFn::Sphere { dim: 2 });
        let mut prior = Archive::new();
        let mut r = rng::stream(9, &[]);
        for i in 1..=20 {
            let c = obj.space().sample_uniform(&mut r);
            let v = SyntheticFn::Sphere { dim: 2 }.value(&SyntheticFn::Sphere { dim: 2 }.point(&c).unwrap());
            prior.push(crate::objective::Entry {
                index: i, config: c, fidelity: 1.0, instances: vec![0], split_scores: vec![Some(v)], raw: Some(v),
                score: v, failed: false, error: None, proposer: "prior".into(), batch: 0, seconds: 0.0,
            }).unwrap();
        }
        let mut bo = BayesOpt::new(obj.space().clone(), BoSettings { gp_restarts: 2, ..BoSettings::default() }, 1).unwrap();
        bo.warm_start(&prior, obj.space()).unwrap();
        let p = bo.propose(&Archive::new()).unwrap();
        assert_eq!(p.len(), 1);
        assert!(bo.max_ei().is_some());
    }
}
