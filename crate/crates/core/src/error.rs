use thiserror::Error;

/// Errors raised by model construction, encoding and decoding.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter violation: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{what} index {index} out of range 1..={max}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("block {0} is not in the detected block support")]
    BlockNotActive(usize),

    #[error("no effective measurements left for block {0}")]
    NoEffectiveMeasurements(usize),

    #[error("device offset {0} was not detected")]
    NotDetected(usize),

    #[error("half-duplex cluster head of block {0} is active")]
    ActiveClusterHead(usize),

    #[error("listener {0} has no channel realization")]
    UnknownListener(usize),

    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
