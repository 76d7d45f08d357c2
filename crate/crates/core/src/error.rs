use thiserror::Error;

use crate::sh::Basis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("order {m} is out of range for degree {n}")]
    OrderOutOfRange { n: usize, m: i64 },

    #[error("argument {0} lies outside [-1, 1]")]
    ArgumentOutOfRange(f64),

    #[error("colatitude {0} lies outside [0, pi]")]
    InvalidDirection(f64),

    #[error("basis mismatch: expected {expected:?}, found {found:?}")]
    BasisMismatch { expected: Basis, found: Basis },

    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{angles} sample directions cannot determine {unknowns} unknowns")]
    Underdetermined { angles: usize, unknowns: usize },

    #[error("sampled system is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("least-squares solution has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("kernel is degenerate: {0}")]
    DegenerateKernel(&'static str),

    #[error("accumulator holds no samples")]
    EmptyAccumulator,

    #[error("covariance estimate is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, trace {trace:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, trace: f64 },

    #[error("grid of design degree {grid} cannot resolve degree {required}")]
    InsufficientGrid { grid: usize, required: usize },

    #[error("field is not band-limited to degree {degree} (relative residual {residual:e})")]
    NotBandLimited { degree: usize, residual: f64 },

    #[error("grid has no raster layout")]
    NotRaster,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
