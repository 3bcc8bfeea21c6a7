use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (non-finite data,
    /// invalid exponent, infeasible specification, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Shapes of vectors, matrices and partitions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An iterative routine ran out of its iteration or wall-clock budget.
    /// `last` carries the best iterate seen so far when one exists.
    #[error("no convergence after {iterations} iterations: {message}")]
    Convergence {
        message: String,
        iterations: usize,
        last: Option<Box<crate::glm::Coefficients>>,
    },

    /// A condition that should be impossible if the surrounding math is
    /// right (e.g. a bisection bracket without a sign change).
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
