use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
    #[error("singular steady-state system: {0}")]
    Singular(String),
    #[error("peak search failed: {0}")]
    Peaks(String),
    #[error("value outside the valid domain: {0}")]
    Domain(String),
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("{failed} of {total} samples failed to demodulate (budget {budget_pct}%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        budget_pct: f64,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
