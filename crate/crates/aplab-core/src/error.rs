use thiserror::Error;

/// Unified error type for the numerical kernel.
///
/// Every fallible operation in this crate reports one of these variants;
/// none of them panic on bad numerical input.
#[derive(Debug, Error)]
pub enum ApError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field/grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("region outside domain: {0}")]
    RegionOutsideDomain(String),

    #[error("singular gradient: epsilon must be positive")]
    SingularGradient,

    #[error("empty positivity set")]
    EmptyPositivitySet,

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("no interior free boundary: {0}")]
    NoInteriorFreeBoundary(String),

    #[error("boundary mismatch: {0}")]
    BoundaryMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ApError>;
