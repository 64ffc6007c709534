//! Command-line front end: `tune`, `nested`, `benchmark` and `report`.
//!
//! Every command reads one TOML document (see the README for the schema),
//! validates it completely, and only then computes and writes files.
//! Outputs that depend on wall time go to `metadata.json` and
//! `timings.csv`; everything else is reproducible byte for byte from the
//! config and seed.

pub mod bench;
pub mod config;

pub use bench::{run_suite, BenchmarkResult, SuiteConfig, SuiteTuner};
pub use config::{ExecutionConfig, RunConfig, TaskConfig};

use crate::data::{DataError, Direction};
use crate::exec::{Executor, Level};
use crate::nested::{nested_evaluate, NestedOptions, NestedReport, TunedLearner};
use crate::objective::{Archive, ArchiveError, Objective};
use crate::space::Config;
use crate::tuners::{run, RunOptions, RunOutcome, TunerError};
use clap::{Args, Parser, Subcommand};
use config::Problem;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Parser)]
#[command(name = "hpo", version, about = "Hyperparameter tuning, nested resampling and tuner benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune a learner or synthetic objective.
    Tune(Overrides),
    /// Nested resampling of a self-tuning learner.
    Nested(Overrides),
    /// Compare tuners under one budget.
    Benchmark(Overrides),
    /// Re-render summaries from an output directory or archive file.
    Report {
        /// `archive.jsonl`, or a directory written by `tune` or `nested`.
        path: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub level: Option<Level>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, seed: &mut Option<u64>, exec: &mut ExecutionConfig, out: &mut Option<PathBuf>) {
        if self.seed.is_some() {
            *seed = self.seed;
        }
        if let Some(w) = self.workers {
            exec.workers = w;
        }
        if let Some(l) = self.level {
            exec.level = l;
        }
        if self.out.is_some() {
            out.clone_from(&self.out);
        }
    }
}

fn executor(e: &ExecutionConfig) -> Result<Executor, CliError> {
    if e.workers == 0 {
        return Err(CliError::Config("field `execution.workers`: must be at least 1".into()));
    }
    Executor::new(e.workers, e.level).map_err(|err| CliError::Failed(format!("worker pool: {err}")))
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("hpo-out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct Metadata {
    command: &'static str,
    started_unix: f64,
    wall_seconds: f64,
    workers: usize,
    level: Level,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    proposal_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluation_seconds: Option<f64>,
}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Incumbent summary written by `tune`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub objective: String,
    pub tuner: String,
    pub seed: u64,
    pub stop: String,
    pub evals: usize,
    pub failed: usize,
    pub iterations: usize,
    pub total_fidelity: f64,
    pub config: Option<Config>,
    /// Incumbent score on the minimized scale.
    pub score: Option<f64>,
    /// Incumbent value on the objective's own scale.
    pub value: Option<f64>,
}

fn summarize(objective: &dyn Objective, tuner: &str, seed: u64, out: &RunOutcome) -> TuneSummary {
    let value = out.incumbent.as_ref().map(|(_, s)| match objective.direction() {
        Direction::Minimize => *s,
        Direction::Maximize => -*s,
    });
    TuneSummary {
        objective: objective.id(),
        tuner: tuner.to_string(),
        seed,
        stop: out.stop.to_string(),
        evals: out.archive.len(),
        failed: out.archive.n_failed(),
        iterations: out.iterations,
        total_fidelity: out.archive.total_fidelity(),
        config: out.incumbent.as_ref().map(|i| i.0.clone()),
        score: out.incumbent.as_ref().map(|i| i.1),
        value,
    }
}

/// `tune`: writes `archive.jsonl`, `archive.csv`, `trace.csv`,
/// `summary.json`, `timings.csv` and `metadata.json`.
pub fn cmd_tune(o: &Overrides) -> Result<(TuneSummary, PathBuf), CliError> {
    let started = now_unix();
    let mut cfg: RunConfig = config::load(&o.config)?;
    o.apply(&mut cfg.seed, &mut cfg.execution, &mut cfg.out);
    let seed = cfg.validate()?;
    let exec = executor(&cfg.execution)?;
    let problem = cfg.problem().resolve(cfg.fidelity)?;
    let objective = config::objective(problem, &cfg.inner, cfg.fidelity, seed)?;
    let mut tuner = cfg.tuner.build(objective.space(), objective.fidelity(), objective.n_instances(), cfg.termination.max_evals, seed)?;
    let mut opts = RunOptions::new(cfg.termination.clone(), seed);
    opts.failure_penalty = cfg.failure_penalty;
    let out = run(objective.as_ref(), tuner.as_mut(), &opts, &exec)?;

    let dir = out_dir(&cfg.out)?;
    out.archive.write_jsonl(create(&dir, "archive.jsonl")?)?;
    out.archive.write_csv(objective.space(), create(&dir, "archive.csv")?)?;
    out.archive.write_trace_csv(create(&dir, "trace.csv")?)?;
    out.archive.write_timings_csv(create(&dir, "timings.csv")?)?;
    let summary = summarize(objective.as_ref(), cfg.tuner.kind(), seed, &out);
    write_json(&dir, "summary.json", &summary)?;
    write_json(
        &dir,
        "metadata.json",
        &Metadata {
            command: "tune",
            started_unix: started,
            wall_seconds: out.wall_seconds,
            workers: exec.workers(),
            level: exec.level(),
            version: env!("CARGO_PKG_VERSION"),
            proposal_seconds: Some(out.proposal_seconds),
            evaluation_seconds: Some(out.archive.total_seconds()),
        },
    )?;
    Ok((summary, dir))
}

/// `nested`: writes `nested.json`, `nested.txt`, one `inner_archive_<b>.jsonl`
/// per outer split, `timings.csv` and `metadata.json`. Fails (after writing)
/// only if every outer split failed.
pub fn cmd_nested(o: &Overrides) -> Result<(NestedReport, PathBuf), CliError> {
    let started = now_unix();
    let mut cfg: RunConfig = config::load(&o.config)?;
    o.apply(&mut cfg.seed, &mut cfg.execution, &mut cfg.out);
    let seed = cfg.validate()?;
    let outer_spec = cfg.outer.clone().ok_or_else(|| CliError::Config("field `outer`: required for nested".into()))?;
    let exec = executor(&cfg.execution)?;
    let Problem::Data { data, learner, space, metric } = cfg.problem().resolve(cfg.fidelity)? else {
        return Err(CliError::Config("field `task`: nested resampling needs a dataset".into()));
    };
    let mut tl = TunedLearner::new(learner, cfg.tuner.clone(), cfg.inner.clone(), metric, cfg.termination.clone()).with_space(space);
    tl.fidelity = cfg.fidelity;
    tl.failure_penalty = cfg.failure_penalty;
    let outer = outer_spec.instantiate(data.target(), &mut crate::rng::stream(seed, &[crate::rng::label::OUTER]))?;
    let report = nested_evaluate(&tl, &data, &outer, seed, &exec, &NestedOptions { final_tuning: cfg.final_tuning });

    let dir = out_dir(&cfg.out)?;
    let mut doc = serde_json::to_value(&report)?;
    let mut refs = Vec::new();
    for f in &report.folds {
        if let Some(a) = &f.archive {
            let name = format!("inner_archive_{}.jsonl", f.fold);
            a.write_jsonl(create(&dir, &name)?)?;
            refs.push(serde_json::Value::String(name));
        } else {
            refs.push(serde_json::Value::Null);
        }
    }
    doc["inner_archives"] = serde_json::Value::Array(refs);
    write_json(&dir, "nested.json", &doc)?;
    std::fs::write(dir.join("nested.txt"), report.table())?;
    let mut w = csv::Writer::from_writer(create(&dir, "timings.csv")?);
    w.write_record(["fold", "tuning_seconds", "refit_seconds", "outer_eval_seconds"])?;
    for f in &report.folds {
        let t = f.timings;
        w.write_record([f.fold.to_string(), t.tuning.to_string(), t.refit.to_string(), t.outer_eval.to_string()])?;
    }
    w.flush()?;
    write_json(
        &dir,
        "metadata.json",
        &Metadata {
            command: "nested",
            started_unix: started,
            wall_seconds: report.wall_seconds,
            workers: exec.workers(),
            level: exec.level(),
            version: env!("CARGO_PKG_VERSION"),
            proposal_seconds: None,
            evaluation_seconds: None,
        },
    )?;
    if report.n_failed() == report.folds.len() {
        return Err(CliError::Failed(format!("every outer split failed; see {}", dir.join("nested.txt").display())));
    }
    Ok((report, dir))
}

/// `benchmark`: writes `traces.csv`, `checkpoints.csv`, `benchmark.txt`
/// and `metadata.json`.
pub fn cmd_benchmark(o: &Overrides) -> Result<(BenchmarkResult, PathBuf), CliError> {
    let started = now_unix();
    let mut suite: SuiteConfig = config::load(&o.config)?;
    o.apply(&mut suite.seed, &mut suite.execution, &mut suite.out);
    let seed = suite.validate()?;
    let exec = executor(&suite.execution)?;
    let t = std::time::Instant::now();
    let result = run_suite(&suite, seed, &exec)?;
    let dir = out_dir(&suite.out)?;
    result.write_traces_csv(create(&dir, "traces.csv")?)?;
    result.write_checkpoints_csv(create(&dir, "checkpoints.csv")?)?;
    std::fs::write(dir.join("benchmark.txt"), result.table())?;
    write_json(
        &dir,
        "metadata.json",
        &Metadata {
            command: "benchmark",
            started_unix: started,
            wall_seconds: t.elapsed().as_secs_f64(),
            workers: exec.workers(),
            level: exec.level(),
            version: env!("CARGO_PKG_VERSION"),
            proposal_seconds: Some(result.runs.iter().flatten().map(|r| r.proposal_seconds).sum()),
            evaluation_seconds: None,
        },
    )?;
    Ok((result, dir))
}

/// Text summary of an archive: size, failures, incumbent, and the
/// best-so-far at ten even steps.
pub fn render_archive(a: &Archive) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "{} evaluations, {} failed, fidelity spent {}", a.len(), a.n_failed(), a.total_fidelity());
    match a.incumbent() {
        Ok(e) => {
            let _ = writeln!(s, "incumbent #{}: score {} at {}", e.index, e.score, e.config);
        }
        Err(e) => {
            let _ = writeln!(s, "no incumbent: {e}");
        }
    }
    let mut proposers: Vec<(&str, usize)> = Vec::new();
    for e in a.entries() {
        match proposers.iter_mut().find(|p| p.0 == e.proposer) {
            Some(p) => p.1 += 1,
            None => proposers.push((&e.proposer, 1)),
        }
    }
    for (p, n) in proposers {
        let _ = writeln!(s, "proposer {p}: {n} evaluations");
    }
    let trace = a.trace();
    let _ = writeln!(s, "{:>8}  {:>12}", "evals", "best");
    let steps: Vec<usize> = (1..=10).map(|i| (trace.len() * i).div_ceil(10)).filter(|&k| k > 0).collect();
    let mut last = 0;
    for k in steps {
        if k == last {
            continue;
        }
        last = k;
        let p = &trace[k - 1];
        let _ = writeln!(s, "{:>8}  {:>12}", p.index, p.best.map_or_else(|| "NA".into(), |b| format!("{b:.6}")));
    }
    s
}

/// `report`: prints and writes `report.txt` for an archive or an output
/// directory (nested reports are re-rendered from `nested.json`).
pub fn cmd_report(path: Option<&Path>, out: Option<&Path>) -> Result<String, CliError> {
    let path = path.or(out).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("hpo-out"));
    let (text, dir) = if path.is_dir() && path.join("nested.json").exists() {
        let report: NestedReport = serde_json::from_reader(BufReader::new(File::open(path.join("nested.json"))?))?;
        (report.table(), path.clone())
    } else {
        let file = if path.is_dir() { path.join("archive.jsonl") } else { path.clone() };
        let archive = Archive::read_jsonl(BufReader::new(File::open(&file)?))?;
        (render_archive(&archive), file.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf))
    };
    let dir = out.map_or(dir, Path::to_path_buf);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("report.txt"), &text)?;
    Ok(text)
}

/// Parses `std::env::args` and runs the command. Exit code 0 on success,
/// 2 for config errors, 1 for anything else.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Tune(o) => cmd_tune(o).map(|(s, dir)| {
            println!("{} evaluations, stop: {}", s.evals, s.stop);
            if let (Some(c), Some(v)) = (&s.config, s.value) {
                println!("incumbent: {c} -> {v}");
            }
            println!("wrote {}", dir.display());
        }),
        Command::Nested(o) => cmd_nested(o).map(|(r, dir)| {
            print!("{}", r.table());
            println!("wrote {}", dir.display());
        }),
        Command::Benchmark(o) => cmd_benchmark(o).map(|(r, dir)| {
            print!("{}", r.table());
            println!("wrote {}", dir.display());
        }),
        Command::Report { path, out } => cmd_report(path.as_deref(), out.as_deref()).map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, CliError::Config(_)) { 2 } else { 1 })
        }
    }
}
