use thiserror::Error;

/// Errors raised by the estimators, the exact theory and the study drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-contract input.
    #[error("invalid input: {0}")]
    Input(String),

    /// A coefficient cannot be computed because a column has zero variance.
    #[error("degenerate sample: column `{column}` is constant")]
    Degenerate { column: String },

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative numeric routine failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A simulation or resampling condition could not be satisfied.
    #[error("infeasible condition: {0}")]
    Infeasible(String),

    /// Requested computation is outside the supported range.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Failure reading or parsing a data file.
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn degenerate(column: impl Into<String>) -> Self {
        Error::Degenerate {
            column: column.into(),
        }
    }
}
