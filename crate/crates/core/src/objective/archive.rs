use crate::space::{Config, SearchSpace, Value};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Version tag written on every JSON-lines record.
pub const SCHEMA_VERSION: u32 = 1;

/// One evaluated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    /// 1-based, strictly increasing.
    pub index: usize,
    pub config: Config,
    pub fidelity: f64,
    /// Instance ids the score was computed on.
    pub instances: Vec<usize>,
    /// Raw metric per instance (`None` where undefined or failed).
    pub split_scores: Vec<Option<f64>>,
    /// Aggregated raw metric; `None` for failed evaluations.
    pub raw: Option<f64>,
    /// Minimized score. Failed entries carry a penalty sentinel.
    pub score: f64,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub proposer: String,
    /// Tuner iteration (batch) that proposed this entry.
    pub batch: usize,
    /// Wall time of the evaluation. Excluded from the JSON record so that
    /// archives compare bit-identical across runs; exported separately.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("evaluation index {got} does not follow {last}")]
    NonIncreasing { last: usize, got: usize },
    #[error("archive has no successful evaluation")]
    AllFailed,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One row of the anytime performance trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub index: usize,
    pub cumulative_fidelity: f64,
    pub cumulative_seconds: f64,
    /// Best score so far; `None` until the first successful evaluation.
    pub best: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    schema: u32,
    #[serde(flatten)]
    entry: Entry,
}

/// Append-only evaluation log. Entries cannot be modified once added.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Archive {
    entries: Vec<Entry>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&Entry> {
        self.entries.iter().find(|e| e.index == index)
    }

    pub fn next_index(&self) -> usize {
        self.entries.last().map_or(1, |e| e.index + 1)
    }

    pub fn last(&self) -> Option<&Entry> {
        self.entries.last()
    }

    pub fn push(&mut self, entry: Entry) -> Result<(), ArchiveError> {
        if let Some(last) = self.entries.last() {
            if entry.index <= last.index {
                return Err(ArchiveError::NonIncreasing { last: last.index, got: entry.index });
            }
        } else if entry.index == 0 {
            return Err(ArchiveError::NonIncreasing { last: 0, got: 0 });
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Score assigned to a failed evaluation: the worst finite score so far
    /// plus `penalty` (or `penalty` alone on an empty archive).
    pub fn failure_score(&self, penalty: f64) -> f64 {
        let worst = self.entries.iter().filter(|e| !e.failed && e.score.is_finite()).map(|e| e.score).reduce(f64::max);
        worst.unwrap_or(0.0) + penalty
    }

    pub fn n_failed(&self) -> usize {
        self.entries.iter().filter(|e| e.failed).count()
    }

    /// Sum of evaluated fidelities, failures included.
    pub fn total_fidelity(&self) -> f64 {
        self.entries.iter().map(|e| e.fidelity).sum()
    }

    pub fn total_seconds(&self) -> f64 {
        self.entries.iter().map(|e| e.seconds).sum()
    }

    /// Highest fidelity among successful entries.
    pub fn max_fidelity(&self) -> Option<f64> {
        self.entries.iter().filter(|e| !e.failed).map(|e| e.fidelity).reduce(f64::max)
    }

    /// Best observed entry: minimal score among successful entries at the
    /// highest fidelity evaluated, ties to the earliest index.
    pub fn incumbent(&self) -> Result<&Entry, ArchiveError> {
        let top = self.max_fidelity().ok_or(ArchiveError::AllFailed)?;
        self.entries
            .iter()
            .filter(|e| !e.failed && e.fidelity == top)
            .reduce(|best, e| if e.score < best.score { e } else { best })
            .ok_or(ArchiveError::AllFailed)
    }

    /// Best-so-far series over all entries, with prefix sums of fidelity
    /// and wall time.
    pub fn trace(&self) -> Vec<TracePoint> {
        let mut fid = 0.0;
        let mut secs = 0.0;
        let mut best: Option<f64> = None;
        self.entries
            .iter()
            .map(|e| {
                fid += e.fidelity;
                secs += e.seconds;
                if !e.failed {
                    best = Some(best.map_or(e.score, |b| b.min(e.score)));
                }
                TracePoint { index: e.index, cumulative_fidelity: fid, cumulative_seconds: secs, best }
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), ArchiveError> {
        for e in &self.entries {
            let line = serde_json::to_string(&Record { schema: SCHEMA_VERSION, entry: e.clone() })
                .map_err(|err| ArchiveError::Parse { line: e.index, message: err.to_string() })?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, ArchiveError> {
        let mut archive = Archive::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(&line).map_err(|e| ArchiveError::Parse { line: i + 1, message: e.to_string() })?;
            if rec.schema != SCHEMA_VERSION {
                return Err(ArchiveError::Parse { line: i + 1, message: format!("unsupported schema {}", rec.schema) });
            }
            archive.push(rec.entry)?;
        }
        Ok(archive)
    }

    /// Flat CSV: one column per parameter of `space` (empty when inactive),
    /// followed by the scalar entry fields.
    pub fn write_csv<W: Write>(&self, space: &SearchSpace, w: W) -> Result<(), ArchiveError> {
        let mut out = csv::Writer::from_writer(w);
        let names: Vec<&str> = space.specs().iter().map(|s| s.name.as_str()).collect();
        let mut header = vec!["index"];
        header.extend(&names);
        header.extend(["fidelity", "raw", "score", "failed", "proposer", "batch", "split_scores"]);
        out.write_record(&header)?;
        for e in &self.entries {
            let mut row = vec![e.index.to_string()];
            row.extend(names.iter().map(|n| e.config.get(n).map_or(String::new(), value_cell)));
            row.push(e.fidelity.to_string());
            row.push(e.raw.map_or(String::new(), |v| v.to_string()));
            row.push(e.score.to_string());
            row.push(e.failed.to_string());
            row.push(e.proposer.clone());
            row.push(e.batch.to_string());
            row.push(
                e.split_scores.iter().map(|s| s.map_or("NA".to_string(), |v| v.to_string())).collect::<Vec<_>>().join(";"),
            );
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<(), ArchiveError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "cumulative_fidelity", "cumulative_seconds", "best"])?;
        for p in self.trace() {
            out.write_record([
                p.index.to_string(),
                p.cumulative_fidelity.to_string(),
                p.cumulative_seconds.to_string(),
                p.best.map_or(String::new(), |b| b.to_string()),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Per-entry wall times, kept apart from the reproducible archive.
    pub fn write_timings_csv<W: Write>(&self, w: W) -> Result<(), ArchiveError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "seconds"])?;
        for e in &self.entries {
            out.write_record([e.index.to_string(), e.seconds.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn value_cell(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Real(x) => x.to_string(),
        Value::Cat(s) => s.clone(),
    }
}

#[cfg(test)]
pub(crate) fn entry(index: usize, score: Option<f64>, fidelity: f64) -> Entry {
    Entry {
        index,
        config: Config::new().with("x", index as f64),
        fidelity,
        instances: vec![0],
        split_scores: vec![score],
        raw: score,
        score: score.unwrap_or(99.0),
        failed: score.is_none(),
        error: score.is_none().then(|| "boom".into()),
        proposer: "test".into(),
        batch: index,
        seconds: 0.5,
    }
}
