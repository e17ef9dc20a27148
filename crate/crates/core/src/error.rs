use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit class
/// (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("invalid joint law: {0}")]
    InvalidJoint(String),

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index error: {0}")]
    Index(String),

    #[error("conditioning event has zero probability: {0}")]
    EmptyEvent(String),

    #[error("enumeration too large: {what} exceeds cap {cap}")]
    EnumerationTooLarge { what: String, cap: u64 },

    #[error("guard exceeded: {what} (limit {limit}, got {got})")]
    Guard { what: String, limit: u64, got: u64 },

    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// CLI exit status: 3 for guard and cap refusals, 2 for everything else
    /// (usage, parse and domain errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EnumerationTooLarge { .. } | Error::Guard { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
