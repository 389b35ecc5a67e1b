use std::io;

use thiserror::Error;

/// Errors produced by the `robmaint` library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate truncation: interval [{lb}, {ub}] carries mass {mass:e}")]
    DegenerateTruncation { lb: f64, ub: f64, mass: f64 },

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("signal too short: {length_m} m available, {required_m} m required")]
    SignalTooShort { length_m: f64, required_m: f64 },

    #[error("richardson section `{section}` has {points} point(s), at least 2 required")]
    SparseSection { section: &'static str, points: usize },

    #[error("likelihood underflow at step {t}")]
    Underflow { t: usize },

    #[error("impossible observation: every state assigns zero likelihood")]
    ImpossibleObservation,

    #[error("transition row {action}/{state} is not stochastic (sum {sum})")]
    NotStochastic { action: usize, state: usize, sum: f64 },

    #[error("sample {0} carries no log-posterior weight")]
    MissingLogPosterior(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported ensemble format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
