use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity {0} outside supported range [2, 12]")]
    BadArity(usize),
    #[error("truth table must have 2^r entries in {{0,1}}, got {0}")]
    BadTruthTable(String),
    #[error("coordinate {coord} out of range for arity {r}")]
    CoordOutOfRange { coord: usize, r: usize },
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("divisibility violated: {0}")]
    Divisibility(String),
    #[error("instance too large: {0}")]
    Overflow(String),
    #[error("assignment invalid: {0}")]
    BadAssignment(String),
    #[error("instance is not index-regular: {0}")]
    NotIndexRegular(String),
    #[error("regularization failed after {attempts} attempts: {reason}")]
    RegularizationFailed { attempts: usize, reason: String },
    #[error("grid configuration invalid: {0}")]
    BadGrid(String),
    #[error("minimization did not converge within the iteration budget")]
    NonConvergence,
    #[error("predicate has linear Fourier weight; the engine requires none")]
    LinearPredicate,
    #[error("predicate mixture is degenerate (xi identically zero): no noise scale")]
    DegeneratePredicate,
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("NaN detected at iteration {0}")]
    NanAtIteration(usize),
    #[error("run history absent; rerun with record_history")]
    MissingHistory,
    #[error("insufficient samples: have {have}, need {need}")]
    InsufficientSamples { have: usize, need: usize },
    #[error("results have mixed configurations: {0}")]
    MixedConfigs(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("file format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
