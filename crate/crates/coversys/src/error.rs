use thiserror::Error;

/// Errors surfaced by the library. Input errors map to CLI exit code 2;
/// property failures are reported as data, not as errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {coord} value {value} out of range (size {size})")]
    ValueOutOfRange { coord: usize, value: u64, size: u64 },

    #[error("coordinate set must be non-empty")]
    EmptyCoordSet,

    #[error("input collection must be non-empty")]
    EmptyInput,

    #[error("space has {points} points, exceeding the sieve cap of {cap}")]
    SpaceTooLarge { points: u128, cap: u128 },

    #[error("product space limited to 64 coordinates for point-level work, got {0}")]
    TooManyCoordinates(usize),

    #[error("coordinate sizes must be at least 2, got {0}")]
    UndersizedCoordinate(u64),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("exponent for prime {0} must be at least 1")]
    ZeroExponent(u64),

    #[error("modulus value exceeds 2^63; keep it factored")]
    OversizedModulus,

    #[error("shift {shift} not reduced modulo {modulus}")]
    UnreducedShift { shift: u64, modulus: u64 },

    #[error("modulus {d} does not divide {n}")]
    DoesNotDivide { d: String, n: String },

    #[error("hyperplane is not arithmetic: prime {prime} fixes level {level} but not level {missing}")]
    NotArithmetic { prime: u64, level: u32, missing: u32 },

    #[error("system is not a cover (witness point index {witness})")]
    NotACover { witness: u128 },

    #[error("system is not minimal (plane {plane} is redundant)")]
    NotMinimal { plane: usize },

    #[error("census size {n} exceeds the configured cap {cap}")]
    CensusCapExceeded { n: usize, cap: usize },

    #[error("restricted set at coordinate {coord} has {len} elements, need at least 2")]
    RestrictedSetTooSmall { coord: usize, len: usize },

    #[error("exploration produced no verdict at coordinate set {coords:?} (free mode)")]
    NoVerdict { coords: Vec<usize> },

    #[error("certificate violation: {0}")]
    CertificateViolation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
