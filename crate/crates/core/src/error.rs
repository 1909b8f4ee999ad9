use thiserror::Error;

/// Failures raised by the weak-measurement toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state has zero norm (post-selection annihilated it)")]
    ZeroNorm,

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("custom generator is not Hermitian (max deviation {deviation:.3e})")]
    NonHermitianCustom { deviation: f64 },

    #[error(
        "coherent amplitude |z| = {z_abs} needs more than {dimension} Fock levels \
         (tail {tail:.3e} >= tolerance {tol:.3e})"
    )]
    Truncation {
        z_abs: f64,
        dimension: usize,
        tail: f64,
        tol: f64,
    },

    #[error("population {population:.3e} in the top {buffer} Fock levels exceeds tolerance {tol:.3e}")]
    TruncationLeak {
        population: f64,
        buffer: usize,
        tol: f64,
    },

    #[error("pre- and post-selected states are orthogonal (|<beta|alpha>| = {overlap:.3e}); weak value undefined")]
    OrthogonalSelection { overlap: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no samples survived post-selection out of {attempted} attempts")]
    NoAcceptedSamples { attempted: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
