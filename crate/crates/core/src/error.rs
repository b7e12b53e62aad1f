use thiserror::Error;

/// Errors raised by the rate and optimization routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constellation violates its own power or amplitude caps.
    #[error("infeasible caps: {0}")]
    InfeasibleCaps(String),

    /// The feasible probability polytope is empty.
    #[error("infeasible set: {0}")]
    InfeasibleSet(String),

    /// The requested constellation order is not supported.
    #[error("unsupported constellation order {0}")]
    UnsupportedOrder(usize),

    /// A vector has the wrong length for the set or constellation it is used with.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The water-filling bisection could not bracket the multiplier.
    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    /// An inner solver failed during an alternating run. `trace` holds the
    /// outer objective values reached before the failure.
    #[error("solver failure after {} outer iterations: {message}", trace.len())]
    Solver { message: String, trace: Vec<f64> },

    /// A scenario file failed validation.
    #[error("{path}: {message}")]
    Config { path: String, message: String },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
