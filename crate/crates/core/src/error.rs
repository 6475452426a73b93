use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("bin {bin} has negative load {load}")]
    NegativeLoad { bin: usize, load: i64 },
    #[error("load {load} in bin {bin} does not fit in 32 bits")]
    LoadOverflow { bin: usize, load: i64 },
    #[error("destination draws do not match the configuration: {0}")]
    DrawMismatch(String),
    #[error("cannot select a ball from an empty queue")]
    EmptyQueue,
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("bin count {0} is not divisible by 4")]
    NotDivisibleByFour(usize),
    #[error("tetris process needs n >= 4, got {0}")]
    TetrisTooSmall(usize),
    #[error("states disagree on bin count ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("arrival window [{from}, {to}] outside recorded rounds [{first}, {last}]")]
    WindowOutOfRange {
        from: u64,
        to: u64,
        first: u64,
        last: u64,
    },
    #[error("no arrival history recorded")]
    EmptyHistory,
    #[error("instance too large for exact enumeration: {0}")]
    SizeGuard(String),
    #[error("fault changed the ball count from {expected} to {found}")]
    FaultBallCount { expected: u64, found: u64 },
    #[error("{name} out of domain: {detail}")]
    Domain { name: &'static str, detail: String },
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        name,
        detail: detail.into(),
    }
}
