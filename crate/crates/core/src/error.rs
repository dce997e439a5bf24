//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the damage-model library.
#[derive(Debug, Error)]
pub enum CoreError {
    /// An argument was outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root-finding bracket did not contain a sign change.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// An iterative method ran out of iterations.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// Numerical breakdown (overflow, step underflow, non-finite value).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Invalid or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration or parameters.
    #[error("config error: {0}")]
    Config(String),

    /// Fit failure with a trace of the objective values seen.
    #[error("fit error: {message} (objective trace: {trace:?})")]
    Fit { message: String, trace: Vec<f64> },

    /// I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for CoreError {
    fn from(e: csv::Error) -> Self {
        CoreError::Data(format!("csv: {e}"))
    }
}

impl CoreError {
    /// Machine-readable category for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            CoreError::Domain(_) => "domain",
            CoreError::Bracket(_) => "bracket",
            CoreError::Convergence(_) => "convergence",
            CoreError::Numeric(_) => "numeric",
            CoreError::Data(_) => "data",
            CoreError::Config(_) => "config",
            CoreError::Fit { .. } => "fit",
            CoreError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
