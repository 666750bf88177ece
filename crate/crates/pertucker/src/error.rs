use thiserror::Error;

/// Errors produced by tensor construction, linear algebra, fitting and IO.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or argument violation (dimension mismatch, mode out of range, ...).
    #[error("invalid argument: {0}")]
    Arg(String),
    /// A NaN or infinity was encountered where finite values are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Numerically degenerate input (e.g. rank-deficient orthonormalization).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// An object violates an invariant it is supposed to maintain.
    #[error("invalid state: {0}")]
    State(String),
    /// Infeasible or inconsistent configuration.
    #[error("invalid config: {0}")]
    Config(String),
    /// Malformed file contents (bad magic, truncated payload, ...).
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Arg(msg.into())
    }
}
