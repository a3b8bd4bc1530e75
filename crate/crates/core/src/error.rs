use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty channel: at least one detector row is required")]
    EmptyChannel,

    #[error("row {row} sums to {sum} (expected 1 within 1e-9)")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("row {row} entry {col} is {value}, outside [0, 1]")]
    OutOfRangeEntry { row: usize, col: usize, value: f64 },

    #[error("weights do not lie on the simplex: {0}")]
    NotOnSimplex(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("initial weight {index} is zero; multiplicative updates cannot leave zero")]
    ZeroInitialWeight { index: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("grid oracle supports at most 4 detectors, got {0}")]
    TooManyDetectors(usize),

    #[error("grid resolution must be at least 2, got {0}")]
    ResolutionTooSmall(usize),

    #[error("gamma {0} outside [0, 1]")]
    GammaOutOfRange(f64),

    #[error("attack group cell is empty")]
    EmptyCell,

    #[error("attack {0} matches no configured group")]
    UnknownAttack(String),

    #[error("attack {0} belongs to more than one group")]
    OverlappingGroups(String),

    #[error("duplicate record: sample {sample_id}, {what}")]
    DuplicateRecord { sample_id: String, what: String },

    #[error("empty class: {0}")]
    EmptyClass(String),

    #[error("target TPR {0} outside (0, 1]")]
    InvalidTarget(f64),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("validation error at line {line}: {reason}")]
    Validation { line: usize, reason: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
