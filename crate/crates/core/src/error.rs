use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants map onto the CLI exit-code contract: contract violations and
/// malformed input are "bad input", `Resource` is the size guard, and
/// `AtomicMarginal`/`NonConvexPotential` are certification-style failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("marginal {index} has atoms; monotone rearrangement is not unique")]
    AtomicMarginal { index: usize },

    #[error("potential {index} is not convex (slope drop {drop:e})")]
    NonConvexPotential { index: usize, drop: f64 },

    #[error("size guard exceeded: {entries} tensor entries > {limit}")]
    Resource { entries: u128, limit: u128 },

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("invalid measure data: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
