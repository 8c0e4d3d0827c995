use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hilbert space dimension must be even and at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite phase {value} at index {index}")]
    NonFinitePhase { index: usize, value: f64 },

    #[error("imaginary residue {residue:e} at grid point ({n}, {m}) exceeds tolerance")]
    ImaginaryResidue { n: usize, m: usize, residue: f64 },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("dense mode limited to N <= {limit}, got N = {n}")]
    DenseTooLarge { n: usize, limit: usize },

    #[error("invalid map parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("least-squares fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that indicate a numerical invariant was violated
    /// rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ImaginaryResidue { .. } | Error::NotHermitian(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
