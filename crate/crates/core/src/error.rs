use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty matrix")]
    Empty,

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("map {index}: not a contraction (operator norm {norm})")]
    NotContraction { index: usize, norm: f64 },

    #[error("map {index}: singular linear part (|det| = {det:e})")]
    SingularMap { index: usize, det: f64 },

    #[error("system needs at least {min} maps, got {got}")]
    TooFewMaps { min: usize, got: usize },

    #[error("letter {letter} out of range for alphabet of size {alphabet}")]
    LetterOutOfRange { letter: usize, alphabet: usize },

    #[error("{what}: {count} cells exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        count: u128,
        cap: usize,
    },

    #[error("iteration did not converge after {iterations} steps (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("iterate left the positive definite cone at step {iteration}")]
    LeftCone { iteration: usize },

    #[error("adjoint dominant eigenvalue {adjoint} differs from primal {primal}")]
    SpectrumMismatch { primal: f64, adjoint: f64 },

    #[error("zero mass")]
    ZeroMass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
