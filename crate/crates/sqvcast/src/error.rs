//! Crate-wide error type.

use crate::month::MonthStamp;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file could not be read or written.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A CSV or JSON input could not be parsed. `line` is 1-based.
    #[error("parse error in {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// Weekly data does not cover the requested months.
    #[error("weekly data does not cover: {}", fmt_months(.0))]
    Coverage(Vec<MonthStamp>),

    /// A series has no usable values in the training window.
    #[error("cannot demean series '{0}': no observed values in the training window")]
    CannotDemean(String),

    /// A split cutoff leaves no holdout data.
    #[error("cutoff {0} leaves an empty test window")]
    EmptyTest(MonthStamp),

    /// Caller broke an interface contract (mismatched lengths, misaligned
    /// series, wrong model for an operation, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A parameter is outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// The innovation covariance lost positive definiteness at step `t` (1-based).
    #[error("numerical degeneracy in the Kalman recursion at t = {t}")]
    Degenerate { t: usize },

    /// A normal-equations system in the M-step has no unique solution.
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// Every EM start failed to produce a finite likelihood.
    #[error("estimation failed for all starts:\n{}", .reasons.join("\n"))]
    EstimationFailure { reasons: Vec<String> },

    /// Interval coverage level must lie strictly inside (0, 1).
    #[error("coverage level {0} is outside (0, 1)")]
    InvalidLevel(f64),

    /// Not enough (or incomplete) data for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// AR prewhitening produced a nonstationary filter.
    #[error("prewhitening failure: {0}")]
    Prewhitening(String),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_months(months: &[MonthStamp]) -> String {
    months
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
