//! Job execution at one chosen parallelization level.
//!
//! A nested tuning run is a loop nest: outer splits, tuning iterations,
//! configurations within a batch, inner folds within a configuration. The
//! [`Executor`] runs exactly one of these loops (or configurations and folds
//! flattened together) as parallel jobs and every other loop sequentially.
//! Each job derives its randomness from its own seed path, so results do
//! not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// One job per outer resampling split.
    Outer,
    /// One job per tuning iteration; in nested runs the outer splits'
    /// tuning loops advance in lockstep.
    Batch,
    /// One job per proposed configuration.
    #[default]
    Config,
    /// One job per inner resampling split.
    Fold,
    /// Configurations times inner splits.
    Combined,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Outer => "outer",
            Level::Batch => "batch",
            Level::Config => "config",
            Level::Fold => "fold",
            Level::Combined => "combined",
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One parallel dispatch: `jobs` independent jobs at `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Dispatch {
    pub level: Level,
    pub jobs: usize,
}

#[derive(Clone)]
pub struct Executor {
    level: Level,
    workers: usize,
    pool: Option<Arc<rayon::ThreadPool>>,
    log: Arc<Mutex<Vec<Dispatch>>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("level", &self.level).field("workers", &self.workers).finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Executor {
    /// Everything runs on the calling thread.
    pub fn sequential() -> Self {
        Self { level: Level::Config, workers: 1, pool: None, log: Arc::default() }
    }

    pub fn new(workers: usize, level: Level) -> Result<Self, rayon::ThreadPoolBuildError> {
        let workers = workers.max(1);
        let pool = if workers > 1 {
            Some(Arc::new(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?))
        } else {
            None
        };
        Ok(Self { level, workers, pool, log: Arc::default() })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Dispatches recorded so far.
    pub fn dispatches(&self) -> Vec<Dispatch> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().expect("log lock").clear();
    }

    /// True when loops at `level` are dispatched as jobs.
    pub fn dispatches_at(&self, level: Level) -> bool {
        self.level == level
    }

    /// Maps `f` over `items`. When `level` is this executor's level the
    /// items are dispatched as jobs (in parallel with more than one
    /// worker), otherwise they run in order on the calling thread. A job
    /// that panics is retried once; a second panic becomes `Err`. Output
    /// order always matches input order.
    pub fn map<T, R, F>(&self, level: Level, items: &[T], f: F) -> Vec<Result<R, String>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        let guarded = |x: &T| -> Result<R, String> {
            match catch_unwind(AssertUnwindSafe(|| f(x))) {
                Ok(r) => Ok(r),
                Err(_) => {
                    log::warn!("job panicked, retrying once");
                    catch_unwind(AssertUnwindSafe(|| f(x))).map_err(panic_message)
                }
            }
        };
        if !self.dispatches_at(level) {
            return items.iter().map(guarded).collect();
        }
        self.log.lock().expect("log lock").push(Dispatch { level, jobs: items.len() });
        match &self.pool {
            Some(pool) => pool.install(|| items.par_iter().map(guarded).collect()),
            None => items.iter().map(guarded).collect(),
        }
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        format!("job panicked: {s}")
    } else if let Some(s) = p.downcast_ref::<String>() {
        format!("job panicked: {s}")
    } else {
        "job panicked".into()
    }
}
