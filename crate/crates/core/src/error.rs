use chrono::NaiveDateTime;

use crate::sarima::SarimaModel;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A line of an input file could not be parsed.
    #[error("line {line}: {message}")]
    Parse {
        /// 1-based line number in the input.
        line: usize,
        /// What went wrong.
        message: String,
    },
    /// The input is syntactically fine but has the wrong shape.
    #[error("structural error: {0}")]
    Structural(String),
    /// The same timestamp appears more than once.
    #[error("duplicate timestamps: {}", format_timestamps(.0))]
    DuplicateTimestamps(Vec<NaiveDateTime>),
    /// Caller-supplied configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value required as a lag is outside the series or not valid.
    #[error("lag {lag} unavailable at hour index {index}")]
    UnavailableLag {
        /// Hour index being forecast.
        index: usize,
        /// The lag (in hours) that could not be supplied.
        lag: usize,
    },
    /// A series is too short for the requested operation.
    #[error("series too short: need at least {needed} values, got {actual}")]
    SeriesTooShort {
        /// Minimum length required.
        needed: usize,
        /// Length supplied.
        actual: usize,
    },
    /// A series contains missing values where a contiguous sequence is required.
    #[error("series contains a missing value at index {0}")]
    MissingValue(usize),

    /// The optimizer hit its iteration cap; the best parameters found are attached.
    #[error("no convergence after {iterations} iterations")]
    NotConverged {
        /// Iterations performed.
        iterations: usize,
        /// Best model seen before giving up.
        best: Box<SarimaModel>,
    },
    /// A linear system was singular or too badly conditioned to solve.
    #[error("ill-conditioned system; dependent columns: {}", .columns.join(", "))]
    IllConditioned {
        /// Columns (or parameters) identified as dependent.
        columns: Vec<String>,
    },
    /// Every candidate in a search failed.
    #[error("all {} fits failed", .0.len())]
    AllFitsFailed(Vec<(String, String)>),

    /// No row of a design matrix satisfied the lag and filter requirements.
    #[error("empty design: {0}")]
    EmptyDesign(String),
    /// Input width does not match a model.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape {
        /// Expected width.
        expected: usize,
        /// Width supplied.
        actual: usize,
    },
    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    Divergence {
        /// Epoch at which the loss became non-finite.
        epoch: usize,
    },

    /// A metric set was requested over zero daytime hours.
    #[error("no daytime hours to evaluate")]
    EmptyEvaluation,
    /// The mean observed value is zero, so CVRMSE is undefined.
    #[error("mean observed value is zero; CVRMSE undefined")]
    UndefinedCvrmse,
    /// A split references data the series does not have.
    #[error("coverage error: {0}")]
    Coverage(String),
    /// Fewer rows than folds.
    #[error("cannot split {rows} rows into {k} folds")]
    FoldSize {
        /// Rows available.
        rows: usize,
        /// Folds requested.
        k: usize,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// CSV reader or writer failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
    /// Model or report (de)serialization failure.
    #[error("serialization: {0}")]
    Serialize(String),
}

fn format_timestamps(ts: &[NaiveDateTime]) -> String {
    ts.iter()
        .map(|t| t.format("%Y-%m-%dT%H:%M").to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
