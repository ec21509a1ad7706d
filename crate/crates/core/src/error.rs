use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin magnitude {0}: must be a positive half-integer")]
    InvalidSpin(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site index {site} out of range for a space with {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("operator is not Hermitian (max |M - M^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("partial trace needs at least one site to keep")]
    EmptyKeepSet,

    #[error("Hilbert-space dimension {dim} exceeds the exact-engine cap of {cap}")]
    ExceedsExactCap { dim: usize, cap: usize },

    #[error("covariance matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("sites {0} and {1} coincide")]
    CoincidentSites(usize, usize),

    #[error("site at the defect position has no defined direction")]
    SiteAtOrigin,

    #[error("perturbative shift breaks down: resonant denominator at theta = {theta}")]
    ResonantDenominator { theta: f64 },

    #[error("eigendecomposition failed to converge")]
    Eigen,

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_) | Error::ExceedsExactCap { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
