use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("{0}")]
    Validation(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A covariance could not be factorized even after the diagonal jitter.
    #[error("ill-conditioned matrix: {0}")]
    Conditioning(String),

    /// The test design carries no discriminating drift (zero mean, zero variance).
    #[error("degenerate design: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("scenario constraint violated: {0}")]
    Scenario(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category used by the CLI error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Validation(_)
            | Error::DimensionMismatch { .. }
            | Error::Scenario(_)
            | Error::Config(_) => "validation",
            Error::Conditioning(_) | Error::Quadrature(_) | Error::NonFinite(_) => "conditioning",
            Error::Degenerate(_) => "degenerate",
            Error::Io(_) | Error::Json(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "validation" => 2,
            "conditioning" => 3,
            "degenerate" => 4,
            "io" => 5,
            _ => 1,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
