use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants are grouped by the process exit code the command-line tool maps
/// them to (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("sample at t = {time} is not Hermitian (defect {defect:.3e})")]
    NotHermitian { time: f64, defect: f64 },

    #[error("sample times must start at 0 and increase strictly: {0}")]
    Ordering(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("gauge mismatch: {0}")]
    GaugeMismatch(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("eigendecomposition kernel failed: {0}")]
    Kernel(String),

    #[error("spectrum degenerate near t = {time}: gap {gap:.3e} below tolerance {tol:.3e}")]
    Degeneracy { time: f64, gap: f64, tol: f64 },

    #[error("level tracking failed at t = {time}: {reason}")]
    Tracking { time: f64, reason: String },

    #[error("gauge fixing failed: {0}")]
    Gauge(String),

    #[error("inconclusive: adiabatic overlap defect {defect:.3e} exceeds {threshold:.3e}")]
    Inconclusive { defect: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Exit code contract: 2 validation, 3 degeneracy/tracking, 4 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::NotHermitian { .. }
            | Error::Ordering(_)
            | Error::Shape(_)
            | Error::GridMismatch(_)
            | Error::Precondition(_)
            | Error::GaugeMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::Config(_)
            | Error::Kernel(_) => 2,
            Error::Degeneracy { .. } | Error::Tracking { .. } | Error::Gauge(_) => 3,
            Error::Inconclusive { .. } => 4,
            Error::Io(_) => 1,
        }
    }
}
