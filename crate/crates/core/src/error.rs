use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: expected {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error(
        "factorization failed at pivot {index} (pivot value {pivot:e}, an upper bound on the \
         minimum eigenvalue; jitter in use {jitter:e})"
    )]
    Factorization { index: usize, pivot: f64, jitter: f64 },

    #[error("singular linear system (reciprocal condition estimate {rcond:e})")]
    SingularSystem { rcond: f64 },

    #[error("solver did not converge after {iterations} iterations (gradient residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate site system: {0}")]
    Degenerate(String),

    #[error("solution is not unique: {0}")]
    NonUnique(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Configuration/input problems as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        if let Error::Realization { source, .. } = self {
            return source.is_input_error();
        }
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Domain(_)
                | Error::UnsupportedModel(_)
                | Error::LengthMismatch { .. }
                | Error::EmptySample
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        expected,
    }
}
