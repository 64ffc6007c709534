use super::{Proposal, StopReason, Termination, Tuner, TunerError};
use crate::exec::{Executor, Level};
use crate::objective::{combine, instance_seed, Archive, Entry, Evaluation, Objective};
use crate::rng;
use crate::space::Config;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub termination: Termination,
    pub seed: u64,
    /// Failed evaluations score as the worst finite score so far plus this.
    pub failure_penalty: f64,
}

impl RunOptions {
    pub fn new(termination: Termination, seed: u64) -> Self {
        Self { termination, seed, failure_penalty: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub archive: Archive,
    pub stop: StopReason,
    /// Result of the tuner's identification step.
    pub incumbent: Option<(Config, f64)>,
    pub iterations: usize,
    /// Time spent inside `propose` (tuner overhead).
    pub proposal_seconds: f64,
    pub wall_seconds: f64,
}

type Timed = (Result<Option<f64>, String>, f64);

fn timed(f: impl FnOnce() -> Result<Option<f64>, String>) -> Timed {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}

/// Evaluates a batch whose first entry gets evaluation index
/// `first_index`. Entry `i` is seeded from `(seed, index)` and instance `b`
/// within it from that seed and `b`, so the result does not depend on how
/// the executor schedules the work. Returns the evaluation and its summed
/// wall time per proposal.
pub fn evaluate_batch(
    objective: &dyn Objective,
    proposals: &[Proposal],
    first_index: usize,
    seed: u64,
    exec: &Executor,
) -> Vec<(Evaluation, f64)> {
    let all: Vec<usize> = (0..objective.n_instances()).collect();
    let plans: Vec<(&Config, f64, Vec<usize>, u64)> = proposals
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let fid = p.fidelity.unwrap_or_else(|| objective.full_fidelity());
            let inst = p.instances.clone().unwrap_or_else(|| all.clone());
            (&p.config, fid, inst, rng::derive_seed(seed, &[rng::label::EVAL, (first_index + i) as u64]))
        })
        .collect();
    let run_one = |cfg: &Config, fid: f64, inst: usize, s: u64| -> Timed {
        timed(|| objective.evaluate_instance(cfg, inst, fid, instance_seed(s, inst)))
    };
    let unwrap = |r: Result<Timed, String>| r.unwrap_or_else(|e| (Err(e), 0.0));
    let per_plan: Vec<Vec<Timed>> = match exec.level() {
        Level::Combined => {
            let pairs: Vec<(usize, usize)> =
                plans.iter().enumerate().flat_map(|(pi, p)| p.2.iter().map(move |&b| (pi, b))).collect();
            let flat = exec.map(Level::Combined, &pairs, |&(pi, b)| {
                let (cfg, fid, _, s) = &plans[pi];
                run_one(cfg, *fid, b, *s)
            });
            let mut grouped: Vec<Vec<Timed>> = plans.iter().map(|p| Vec::with_capacity(p.2.len())).collect();
            for ((pi, _), r) in pairs.iter().zip(flat) {
                grouped[*pi].push(unwrap(r));
            }
            grouped
        }
        Level::Fold => plans
            .iter()
            .map(|(cfg, fid, inst, s)| {
                exec.map(Level::Fold, inst, |&b| run_one(cfg, *fid, b, *s)).into_iter().map(unwrap).collect()
            })
            .collect(),
        _ => exec
            .map(Level::Config, &plans, |(cfg, fid, inst, s)| {
                inst.iter().map(|&b| run_one(cfg, *fid, b, *s)).collect::<Vec<_>>()
            })
            .into_iter()
            .zip(&plans)
            .map(|(r, p)| r.unwrap_or_else(|e| p.2.iter().map(|_| (Err(e.clone()), 0.0)).collect()))
            .collect(),
    };
    plans
        .iter()
        .zip(per_plan)
        .map(|(p, results)| {
            let secs = results.iter().map(|r| r.1).sum();
            (combine(objective, p.2.clone(), results.into_iter().map(|r| r.0).collect()), secs)
        })
        .collect()
}

/// A tuning loop that can be advanced one iteration at a time.
#[derive(Debug)]
pub struct TuningRun {
    pub archive: Archive,
    pub stop: Option<StopReason>,
    pub iterations: usize,
    pub proposal_seconds: f64,
    started: Instant,
}

impl Default for TuningRun {
    fn default() -> Self {
        Self::new()
    }
}

impl TuningRun {
    pub fn new() -> Self {
        Self { archive: Archive::new(), stop: None, iterations: 0, proposal_seconds: 0.0, started: Instant::now() }
    }

    pub fn is_done(&self) -> bool {
        self.stop.is_some()
    }

    /// One tuning iteration: check termination, propose, evaluate, append,
    /// observe. Returns whether the run continues.
    pub fn step(
        &mut self,
        objective: &dyn Objective,
        tuner: &mut dyn Tuner,
        opts: &RunOptions,
        exec: &Executor,
    ) -> Result<bool, TunerError> {
        if self.stop.is_some() {
            return Ok(false);
        }
        let term = &opts.termination;
        if let Some(r) = term.check(&self.archive, self.started.elapsed().as_secs_f64(), tuner.max_ei()) {
            self.stop = Some(r);
            return Ok(false);
        }
        if tuner.is_finished() {
            self.stop = Some(StopReason::Exhausted);
            return Ok(false);
        }
        let t = Instant::now();
        let mut proposals = tuner.propose(&self.archive)?;
        self.proposal_seconds += t.elapsed().as_secs_f64();
        if proposals.is_empty() {
            self.stop = Some(StopReason::Exhausted);
            return Ok(false);
        }
        for p in &proposals {
            objective.space().check(&p.config)?;
        }

        // cut the batch at the hard budgets; the run ends after it
        let mut cut = None;
        if let Some(rem) = term.remaining_evals(&self.archive) {
            if proposals.len() > rem {
                proposals.truncate(rem);
                cut = Some(StopReason::MaxEvals);
            }
        }
        if let Some(rem) = term.remaining_fidelity(&self.archive) {
            let mut spent = 0.0;
            let keep = proposals
                .iter()
                .take_while(|p| {
                    spent += p.fidelity.unwrap_or_else(|| objective.full_fidelity());
                    spent <= rem + 1e-9
                })
                .count();
            if keep < proposals.len() {
                proposals.truncate(keep);
                cut = Some(StopReason::MaxFidelity);
            }
        }
        if proposals.is_empty() {
            self.stop = cut;
            return Ok(false);
        }

        let first = self.archive.next_index();
        let results = evaluate_batch(objective, &proposals, first, opts.seed, exec);
        let mut added = Vec::with_capacity(proposals.len());
        for (i, (p, (ev, secs))) in proposals.into_iter().zip(results).enumerate() {
            let failed = ev.raw.is_none();
            let score = match ev.raw {
                Some(v) => objective.to_score(v),
                None => self.archive.failure_score(opts.failure_penalty),
            };
            if let Some(e) = &ev.error {
                log::debug!("evaluation {} failed: {e}", first + i);
            }
            let entry = Entry {
                index: first + i,
                config: p.config,
                fidelity: p.fidelity.unwrap_or_else(|| objective.full_fidelity()),
                instances: ev.instances,
                split_scores: ev.per_instance,
                raw: ev.raw,
                score,
                failed,
                error: ev.error,
                proposer: tuner.kind().to_string(),
                batch: self.iterations,
                seconds: secs,
            };
            self.archive.push(entry.clone())?;
            added.push(entry);
        }
        tuner.observe(&added);
        self.iterations += 1;
        if cut.is_some() {
            self.stop = cut;
            return Ok(false);
        }
        Ok(true)
    }

    pub fn finish(self, tuner: &dyn Tuner) -> RunOutcome {
        RunOutcome {
            incumbent: tuner.identify(&self.archive),
            stop: self.stop.unwrap_or(StopReason::Exhausted),
            iterations: self.iterations,
            proposal_seconds: self.proposal_seconds,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            archive: self.archive,
        }
    }
}

/// Runs `tuner` on `objective` until a termination rule fires.
pub fn run(
    objective: &dyn Objective,
    tuner: &mut dyn Tuner,
    opts: &RunOptions,
    exec: &Executor,
) -> Result<RunOutcome, TunerError> {
    opts.termination.validate().map_err(TunerError::Setting)?;
    let mut state = TuningRun::new();
    while state.step(objective, tuner, opts, exec)? {}
    Ok(state.finish(tuner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{SyntheticFn, SyntheticObjective};
    use crate::tuners::{RandomSearch, RandomSettings};

    #[test]
    fn random_budget_exact_and_parallel_equal() {
        let obj = SyntheticObjective::new(SyntheticFn::Sphere { dim: 2 }).with_noise(0.1, 3);
        let go = |exec: &Executor| {
            let mut t = RandomSearch::new(obj.space().clone(), RandomSettings { batch: 7 }, 5);
            run(&obj, &mut t, &RunOptions::new(Termination::evals(20), 5), exec).unwrap()
        };
        let a = go(&Executor::sequential());
        assert_eq!(a.archive.len(), 20);
        assert_eq!(a.stop, StopReason::MaxEvals);
        for level in [Level::Config, Level::Fold, Level::Combined] {
            let b = go(&Executor::new(4, level).unwrap());
            let strip = |x: &Archive| x.entries().iter().map(|e| (e.config.clone(), e.score)).collect::<Vec<_>>();
            assert_eq!(strip(&a.archive), strip(&b.archive));
        }
    }

    #[test]
    fn failures_get_penalty_scores() {
        let obj = SyntheticObjective::new(SyntheticFn::Sphere { dim: 1 }).with_fidelity(1.0, 4.0);
        let props = vec![
            Proposal { config: Config::new().with("x1", 2.0), fidelity: Some(4.0), instances: None },
            Proposal { config: Config::new().with("x1", 1.0), fidelity: Some(9.0), instances: None },
        ];
        let r = evaluate_batch(&obj, &props, 1, 0, &Executor::sequential());
        assert_eq!(r[0].0.raw, Some(4.0));
        assert!(r[1].0.error.is_some());
    }
}
