//! Datasets, resampling plans and performance metrics.

mod dataset;
mod estimate;
mod metrics;
mod resampling;
pub mod synth;

pub use dataset::{Column, ColumnData, Dataset, Matrix, Target, TaskKind};
pub use estimate::{estimate_ge, evaluate_split, Aggregator, Estimate, EstimateError};
pub use metrics::{Direction, Metric, MetricError, PredictionMatrix, Requirement};
pub use resampling::{make_holdout, make_kfold, subsample, ResamplingPlan, ResamplingSpec, Split};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dataset has no rows")]
    Empty,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("target column has missing or non-finite entries")]
    MissingTarget,
    #[error("target column `{0}` not found")]
    NoTarget(String),
    #[error("column `{0}` is not numeric")]
    NotNumeric(String),
    #[error("column `{0}` has missing cells")]
    MissingFeature(String),
    #[error("cannot parse {0}")]
    Parse(String),
    #[error("invalid resampling: {0}")]
    Resampling(String),
    #[error("class `{0}` has fewer than two members, cannot stratify")]
    StratumTooSmall(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
