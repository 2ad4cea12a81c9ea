use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in this crate.
///
/// Variants fall into three families (configuration, data, numerical), see
/// [`Error::category`]. The CLI maps these onto its exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("point with squared norm {norm_sq} lies outside the linear-kernel domain (kappa^2 = {kappa_sq})")]
    OutsideDomain { norm_sq: f64, kappa_sq: f64 },

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("invalid label {label} for a margin loss (labels must be -1 or +1)")]
    InvalidLabel { label: f64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("csv parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error(
        "kernel matrix is degenerate even with jitter {max_jitter:e}: point {point} nearly duplicates point {partner}"
    )]
    DegenerateKernel {
        point: usize,
        partner: usize,
        max_jitter: f64,
    },

    #[error("linear system is numerically singular (condition estimate {condition:e}); try a larger lambda or a smaller projection dimension M")]
    Singular { condition: f64 },

    #[error("optimizer failed to converge after {iterations} iterations (final gradient inf-norm {grad_norm:e})")]
    OptimizerFailure { iterations: usize, grad_norm: f64 },

    #[error("conditional variance {0:e} is negative beyond roundoff")]
    NegativeVariance(f64),

    #[error("model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },

    #[error("model checksum mismatch")]
    Checksum,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::UnsupportedKernel(_) => ErrorCategory::Usage,
            Error::DegenerateKernel { .. }
            | Error::Singular { .. }
            | Error::OptimizerFailure { .. }
            | Error::NegativeVariance(_) => ErrorCategory::Numerical,
            _ => ErrorCategory::Data,
        }
    }
}
