use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not a prime in [2, 251]")]
    NotPrime(u32),
    #[error("base mismatch: {0} vs {1}")]
    BaseMismatch(u8, u8),
    #[error("polynomial is not monic or has degree < 1")]
    NotMonic,
    #[error("polynomial is reducible")]
    Reducible,
    #[error("improper fraction: deg y = {deg_y} >= t * deg p = {bound}")]
    ImproperFraction { deg_y: usize, bound: usize },
    #[error("base polynomials {0} and {1} are not coprime")]
    NotCoprime(usize, usize),
    #[error("requested {requested} polynomials but supply is exhausted at degree {max_degree}")]
    SupplyExhausted { requested: usize, max_degree: usize },
    #[error("repeated prime {0} in Halton bases")]
    RepeatedPrime(u8),
    #[error("precision mismatch: expected {expected} digits, got {got}")]
    PrecisionMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("resolution needs {needed} digits but only {available} are available")]
    ResolutionExceedsPrecision { needed: usize, available: usize },
    #[error("expected {expected} points, got {got}")]
    WrongCardinality { expected: u64, got: u64 },
    #[error("index {index} needs more than {digits} base-b digits")]
    IndexOutOfRange { index: u64, digits: usize },
    #[error("integer overflow computing {0}")]
    Overflow(&'static str),
    #[error("coarse scrambling needs a common prime base")]
    NonDigitalBase,
    #[error("invalid subset or resolution: {0}")]
    InvalidQuery(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
