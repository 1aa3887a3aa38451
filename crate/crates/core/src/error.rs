use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A point lies outside the domain (or the unit cube) it was declared in.
    #[error("point {point:?} violates domain bounds: {reason}")]
    DomainViolation { point: Vec<f64>, reason: String },

    /// The objective returned NaN or an infinity.
    #[error("objective returned non-finite value {value} at {point:?}")]
    NonFiniteValue { point: Vec<f64>, value: f64 },

    /// An argument is outside the range a formula is defined for.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Inconsistent or incomplete configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Unknown objective or MDP name.
    #[error("unknown name: {0}")]
    UnknownName(String),

    /// Master/worker message in an impossible state (e.g. double commit).
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;
