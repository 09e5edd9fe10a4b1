use thiserror::Error;

/// Errors raised by kernel evaluation, solvers and data loading.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the enumeration cap of {cap}")]
    CapExceeded { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector length {len} is not divisible by the particle dimension {dy}")]
    NotDivisible { len: usize, dy: usize },

    #[error("the {family} kernel does not provide derivatives")]
    UnsupportedDerivative { family: &'static str },

    #[error("strategy {strategy} cannot be used with a {family} base kernel")]
    IncompatibleStrategy {
        strategy: &'static str,
        family: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("denominator {value:e} is degenerate and no limit formula applies")]
    DegenerateDenominator { value: f64 },

    #[error("cannot pad a graph of size {size} to the smaller size {target}")]
    PadTooSmall { size: usize, target: usize },

    #[error("tensor is not flagged as pairwise symmetric")]
    NotPairwiseSymmetric,

    #[error("linear system is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("requested {requested} components but only {available} are available")]
    TooManyComponents { requested: usize, available: usize },

    #[error("constraint null space is empty")]
    EmptyNullSpace,

    #[error("only {found} stable eigenpairs found, {requested} requested")]
    TooFewEigenpairs { requested: usize, found: usize },

    #[error("potential is singular at sample point {index}")]
    PotentialSingularity { index: usize },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("atom label `{0}` is not one of C, O, S")]
    InvalidLabel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
