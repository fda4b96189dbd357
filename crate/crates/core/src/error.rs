use thiserror::Error;

/// Errors produced by problem loading, analysis, differentiation and optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unit error: {0}")]
    Unit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("element {element} has zero length")]
    ZeroLength { element: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Raised by the factorization; `pivot` is the free-DOF index (unpermuted) where it broke down.
    #[error("stiffness matrix is not positive definite (pivot at free dof {pivot}); the structure is unstable")]
    NotPositiveDefinite { pivot: usize },

    #[error("model has no free degrees of freedom")]
    NoFreeDofs,

    #[error("analysis failed in finite-difference stencil of coordinate {coordinate}: {source}")]
    Stencil {
        coordinate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dense du/dK oracle limited to n <= 12, got n = {0}")]
    OracleTooLarge(usize),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    /// True when the error means the structure itself cannot be analyzed.
    pub fn is_singular(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. } | Error::NoFreeDofs | Error::ZeroLength { .. } => {
                true
            }
            Error::Stencil { source, .. } => source.is_singular(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
