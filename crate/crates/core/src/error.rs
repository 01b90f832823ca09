use thiserror::Error;

use crate::combinatorics::Infeasibility;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// User and slot indices carried by variants are 0-based; node indices are
/// 1-based. Messages print every index 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("operands belong to different fields (q={left} vs q={right})")]
    FieldMismatch { left: u64, right: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is out of range (need 2 <= q < 2^31)")]
    ModulusOutOfRange(u64),
    #[error("matrix is singular (rank {rank} of {size})")]
    SingularMatrix { rank: usize, size: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("integer overflow computing {0}")]
    Overflow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("evaluation points must be distinct and nonzero (offending value {0})")]
    BadEvaluationPoint(u64),
    #[error("need at least {needed} shares, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("window sequence infeasible: {0}")]
    Infeasible(Infeasibility),
    #[error("search budget of {budget} node expansions exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("{m} users exceed the maximum of {max} for n={n}")]
    InfeasibleUserCount { n: usize, m: u64, max: u64 },
    #[error("no Sperner family realizes the size profile ({expansions} search nodes exhausted)")]
    Unrealizable { expansions: u64 },
    #[error("access structure is not Sperner: set of user {} is contained in set of user {}", .contained + 1, .container + 1)]
    NotSperner { contained: usize, container: usize },
    #[error("field too small: q={q} but at least {needed} distinct nonzero points are needed")]
    FieldTooSmall { q: u64, needed: usize },
    #[error("linear system is singular for q={q}, m={m}, k={k} (det(A) = 0)")]
    SingularSystem { q: u64, m: usize, k: usize },
    #[error("protocol unavailable, {0}")]
    WindowInfeasible(Infeasibility),
    #[error("user {} is missing slot {}", .user + 1, .slot + 1)]
    MissingSlot { user: usize, slot: usize },
    #[error("operation requires a {expected} protocol, got {got}")]
    WrongKind { expected: &'static str, got: String },
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed document: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Format(err.to_string())
    }
}
