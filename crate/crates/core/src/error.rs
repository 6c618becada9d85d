use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("coupling graph is reducible (unit {unreachable} is not mutually reachable from unit 0); construct with `allow_reducible` to opt in")]
    Reducible { unreachable: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-positive state W[{index}] = {value} at t = {t}; retry with a smaller dt")]
    Positivity { t: f64, index: usize, value: f64 },

    #[error("share vector is not normalized: mean = {mean}, expected 1")]
    Normalization { mean: f64 },

    #[error("power iteration did not converge in {iterations} iterations (step change {delta:e}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        delta: f64,
        residual: f64,
    },

    #[error("fixed-point denominator for unit {index} is {value:e}")]
    SingularDenominator { index: usize, value: f64 },

    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),

    #[error("distance band {0} contains no pairs")]
    EmptyBand(usize),

    #[error("no J-curve: series is monotone {0}")]
    NoJCurve(Direction),

    #[error("spread never stays below {eps:e} within the trajectory")]
    NotReached { eps: f64 },

    #[error("degenerate correlation: {0}")]
    Degenerate(String),

    #[error("{file}: line {line}, column `{column}`: {message}")]
    Schema {
        file: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Positivity { .. } | Error::NoConvergence { .. } | Error::SingularDenominator { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

/// Direction of a monotone series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Increasing => f.write_str("increasing"),
            Direction::Decreasing => f.write_str("decreasing"),
        }
    }
}
