//! Tuner comparison under a shared budget, with anytime traces.

use super::config::{objective, ExecutionConfig, ProblemSpec, TaskConfig};
use super::CliError;
use crate::data::ResamplingSpec;
use crate::exec::Executor;
use crate::objective::{FidelityRange, TracePoint};
use crate::rng;
use crate::space::SpaceDoc;
use crate::tuners::{run, RunOptions, Termination, TunerSpec};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::path::PathBuf;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteTuner {
    /// Column label; defaults to the tuner kind.
    pub name: Option<String>,
    /// Per-tuner budget; must equal every other tuner's.
    pub termination: Option<Termination>,
    pub tuner: TunerSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub task: TaskConfig,
    pub learner: Option<String>,
    pub metric: Option<String>,
    pub space: Option<SpaceDoc>,
    #[serde(default = "default_inner")]
    pub inner: ResamplingSpec,
    pub fidelity: Option<FidelityRange>,
    /// Budget shared by all tuners without their own.
    pub termination: Option<Termination>,
    /// Budget points for the summary table; ten even steps by default.
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default)]
    pub execution: ExecutionConfig,
    pub out: Option<PathBuf>,
    pub tuners: Vec<SuiteTuner>,
}

fn default_replications() -> usize {
    10
}

fn default_inner() -> ResamplingSpec {
    ResamplingSpec::cv(3)
}

/// Unit budgets and checkpoints are expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Evals,
    Fidelity,
    Seconds,
}

impl Axis {
    fn of(t: &Termination) -> Option<(Axis, f64)> {
        if let Some(n) = t.max_evals {
            Some((Axis::Evals, n as f64))
        } else if let Some(f) = t.max_fidelity {
            Some((Axis::Fidelity, f))
        } else {
            t.max_wall_time.map(|s| (Axis::Seconds, s))
        }
    }

    fn x(self, p: &TracePoint) -> f64 {
        match self {
            Axis::Evals => p.index as f64,
            Axis::Fidelity => p.cumulative_fidelity,
            Axis::Seconds => p.cumulative_seconds,
        }
    }
}

/// One tuner on one replication.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub replication: usize,
    pub seed: u64,
    pub trace: Vec<TracePoint>,
    /// Best score found (minimized scale).
    pub best: Option<f64>,
    pub evals: usize,
    #[serde(skip)]
    pub proposal_seconds: f64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub tuners: Vec<String>,
    pub axis: Axis,
    pub budget: f64,
    pub checkpoints: Vec<f64>,
    /// `runs[t][r]`: tuner `t` on replication `r`.
    pub runs: Vec<Vec<RunRecord>>,
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

impl BenchmarkResult {
    /// Best-so-far of every replication at budget `c` (replications with
    /// nothing evaluated by then are left out).
    pub fn at(&self, tuner: usize, c: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self.runs[tuner]
            .iter()
            .filter_map(|r| r.trace.iter().take_while(|p| self.axis.x(p) <= c + 1e-9).last().and_then(|p| p.best))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// (q1, median, q3) of best-so-far at `c`.
    pub fn quartiles(&self, tuner: usize, c: f64) -> Option<(f64, f64, f64)> {
        let v = self.at(tuner, c);
        Some((quantile(&v, 0.25)?, quantile(&v, 0.5)?, quantile(&v, 0.75)?))
    }

    pub fn finals(&self, tuner: usize) -> Vec<Option<f64>> {
        self.runs[tuner].iter().map(|r| r.best).collect()
    }

    /// Fraction of replications where tuner `a` ends strictly better than
    /// tuner `b`.
    pub fn win_rate(&self, a: usize, b: usize) -> f64 {
        let wins = self.runs[a]
            .iter()
            .zip(&self.runs[b])
            .filter(|(x, y)| match (x.best, y.best) {
                (Some(p), Some(q)) => p < q,
                (Some(_), None) => true,
                _ => false,
            })
            .count();
        wins as f64 / self.runs[a].len().max(1) as f64
    }

    pub fn median_overhead(&self, tuner: usize) -> f64 {
        let mut v: Vec<f64> = self.runs[tuner].iter().map(|r| r.proposal_seconds).collect();
        v.sort_by(f64::total_cmp);
        quantile(&v, 0.5).unwrap_or(0.0)
    }

    /// Plain-text comparison table: median [q1, q3] of best-so-far per
    /// checkpoint, then the median proposal overhead.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let unit = match self.axis {
            Axis::Evals => "evals",
            Axis::Fidelity => "fidelity",
            Axis::Seconds => "seconds",
        };
        let _ = writeln!(s, "best-so-far score (lower is better), median [q1, q3] over {} replications", self.runs.first().map_or(0, Vec::len));
        let _ = write!(s, "{:>10}", unit);
        for name in &self.tuners {
            let _ = write!(s, "  {name:>28}");
        }
        let _ = writeln!(s);
        for &c in &self.checkpoints {
            let _ = write!(s, "{c:>10}");
            for t in 0..self.tuners.len() {
                let cell = self.quartiles(t, c).map_or_else(|| "NA".into(), |(a, m, b)| format!("{m:.4} [{a:.4}, {b:.4}]"));
                let _ = write!(s, "  {cell:>28}");
            }
            let _ = writeln!(s);
        }
        let _ = write!(s, "{:>10}", "overhead");
        for t in 0..self.tuners.len() {
            let _ = write!(s, "  {:>27.3}s", self.median_overhead(t));
        }
        let _ = writeln!(s);
        s
    }

    pub fn write_traces_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["tuner", "replication", "seed", "index", "cumulative_fidelity", "best"])?;
        for (t, runs) in self.runs.iter().enumerate() {
            for r in runs {
                for p in &r.trace {
                    out.write_record([
                        self.tuners[t].clone(),
                        r.replication.to_string(),
                        r.seed.to_string(),
                        p.index.to_string(),
                        p.cumulative_fidelity.to_string(),
                        p.best.map_or_else(|| "NA".into(), |b| b.to_string()),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_checkpoints_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["tuner", "checkpoint", "n", "q1", "median", "q3"])?;
        for (t, name) in self.tuners.iter().enumerate() {
            for &c in &self.checkpoints {
                let n = self.at(t, c).len();
                let (a, m, b) = self.quartiles(t, c).map_or(("NA".into(), "NA".into(), "NA".into()), |(a, m, b)| {
                    (a.to_string(), m.to_string(), b.to_string())
                });
                out.write_record([name.clone(), c.to_string(), n.to_string(), a, m, b])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

impl SuiteConfig {
    pub fn problem(&self) -> ProblemSpec<'_> {
        ProblemSpec { task: &self.task, learner: self.learner.as_deref(), metric: self.metric.as_deref(), space: self.space.as_ref() }
    }

    /// Budget every tuner runs under; rejects suites whose tuners differ.
    pub fn budget(&self) -> Result<Termination, CliError> {
        let mut budgets = self.tuners.iter().map(|t| t.termination.clone().or_else(|| self.termination.clone()));
        let first = budgets.next().flatten().ok_or_else(|| CliError::Config("field `termination`: every tuner needs a budget".into()))?;
        for (i, b) in budgets.enumerate() {
            if b.as_ref() != Some(&first) {
                return Err(CliError::Config(format!("mismatched budgets: tuner {} differs from tuner 0", i + 1)));
            }
        }
        Ok(first)
    }

    pub fn validate(&self) -> Result<u64, CliError> {
        let seed = self.seed.ok_or_else(|| CliError::Config("field `seed`: required (set it in the config or pass --seed)".into()))?;
        if self.tuners.len() < 2 {
            return Err(CliError::Config("≥ 2 tuners required".into()));
        }
        if self.replications == 0 {
            return Err(CliError::Config("field `replications`: must be at least 1".into()));
        }
        self.problem().validate()?;
        let budget = self.budget()?;
        budget.validate().map_err(|e| CliError::Config(format!("field `termination`: {e}")))?;
        Ok(seed)
    }

    fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for t in &self.tuners {
            let base = t.name.clone().unwrap_or_else(|| t.tuner.kind().to_string());
            let mut name = base.clone();
            let mut k = 2;
            while names.contains(&name) {
                name = format!("{base}_{k}");
                k += 1;
            }
            names.push(name);
        }
        names
    }
}

/// Runs every tuner on every replication. Replication `r` uses the seed
/// derived from `(seed, r)` for the problem instance, the tuner and the
/// evaluations, so tuners are compared on common random numbers.
pub fn run_suite(suite: &SuiteConfig, seed: u64, exec: &Executor) -> Result<BenchmarkResult, CliError> {
    let budget = suite.budget()?;
    let (axis, total) = Axis::of(&budget).expect("validated hard budget");
    let checkpoints = suite.checkpoints.clone().unwrap_or_else(|| {
        let mut c: Vec<f64> = (1..=10).map(|i| total * i as f64 / 10.0).collect();
        if axis == Axis::Evals {
            c.iter_mut().for_each(|x| *x = x.ceil());
            c.dedup();
        }
        c
    });
    let mut runs: Vec<Vec<RunRecord>> = vec![Vec::new(); suite.tuners.len()];
    for r in 0..suite.replications {
        let rep_seed = rng::derive_seed(seed, &[rng::label::DATA, r as u64]);
        for (t, st) in suite.tuners.iter().enumerate() {
            let problem = suite.problem().resolve(suite.fidelity)?;
            let obj = objective(problem, &suite.inner, suite.fidelity, rep_seed)?;
            let mut tuner = st.tuner.build(obj.space(), obj.fidelity(), obj.n_instances(), budget.max_evals, rep_seed)?;
            let out = run(obj.as_ref(), tuner.as_mut(), &RunOptions::new(budget.clone(), rep_seed), exec)?;
            runs[t].push(RunRecord {
                replication: r,
                seed: rep_seed,
                trace: out.archive.trace(),
                best: out.incumbent.as_ref().map(|i| i.1),
                evals: out.archive.len(),
                proposal_seconds: out.proposal_seconds,
                wall_seconds: out.wall_seconds,
            });
        }
    }
    Ok(BenchmarkResult { tuners: suite.names(), axis, budget: total, checkpoints, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUITE: &str = r#"
seed = 1
replications = 3
[task]
synthetic = { function = "sphere", dim = 2 }
[termination]
max_evals = 6
[[tuners]]
tuner = { kind = "random" }
[[tuners]]
tuner = { kind = "grid", resolution = 3 }
"#;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn suite_runs_and_rejects_bad_budgets() {
        let s: SuiteConfig = toml::from_str(SUITE).unwrap();
        let seed = s.validate().unwrap();
        let r = run_suite(&s, seed, &Executor::sequential()).unwrap();
        assert_eq!(r.tuners, ["random", "grid"]);
        assert_eq!(r.checkpoints, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(r.runs.iter().all(|t| t.len() == 3 && t.iter().all(|x| x.evals == 6)));
        let (_, m1, _) = r.quartiles(0, 1.0).unwrap();
        let (_, m6, _) = r.quartiles(0, 6.0).unwrap();
        assert!(m6 <= m1);

        let mut one = s.clone();
        one.tuners.truncate(1);
        assert!(one.validate().unwrap_err().to_string().contains("≥ 2 tuners required"));
        let mut bad = s.clone();
        bad.tuners[1].termination = Some(Termination::evals(7));
        assert!(bad.validate().unwrap_err().to_string().contains("mismatched budgets"));
    }
}
