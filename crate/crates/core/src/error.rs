use thiserror::Error;

/// Errors raised by the census, certificate and likelihood routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Two polished roots landed within the simplicity guard of each other.
    #[error("roots {first} and {second} coincide within {separation:e} (multiple root?)")]
    SimplicityViolation {
        first: String,
        second: String,
        separation: f64,
    },

    #[error("root {root} did not polish: residual {residual:e} exceeds {bound:e}")]
    RootResidual {
        root: String,
        residual: f64,
        bound: f64,
    },

    #[error("matrix is singular and no vanishing minors were supplied")]
    NeedsMinors,

    #[error("structured matrix is numerically singular at census root x = {x}")]
    RootOfSingularMatrix { x: String },

    #[error("inverse has diagonal entry {diagonal:e} below tolerance; cannot normalize")]
    NormalizationDegenerate { diagonal: f64 },

    #[error("census point failed validation: {0}")]
    ValidationFailure(String),

    #[error("sampled concentration matrix stayed singular after {reshifts} diagonal reshifts")]
    SampleSingular { reshifts: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    MaxIterations { iterations: usize, grad_norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
