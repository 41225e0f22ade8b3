use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("A must be one-to-one (velocity {0} is zero)")]
    NotOneToOne(f64),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not negative definite (largest eigenvalue {0:e})")]
    NotNegativeDefinite(f64),

    #[error("eigenvalue {index} is not simple (gap {gap:e} below threshold {threshold:e})")]
    NonSimpleEigenvalue { index: usize, gap: f64, threshold: f64 },

    #[error("kernel/range decomposition check failed: {0}")]
    DecompositionCheck(String),

    #[error("Γ₀ is singular to working precision (min |eigenvalue| {0:e})")]
    SingularGamma0(f64),

    #[error("zero eigenvalue in spectral decomposition ({0:e})")]
    ZeroEigenvalue(f64),

    #[error("fixed-point iteration failed to contract (factor {0:.3})")]
    ContractionFailure(f64),

    #[error("parameter norm {norm:e} exceeds admissible radius {radius:e}")]
    RadiusExceeded { norm: f64, radius: f64 },

    #[error("model is not genuinely nonlinear (|Λ| = {0:e})")]
    NotGenuinelyNonlinear(f64),

    #[error("no Rankine-Hugoniot solution: {0}")]
    NoSolution(String),

    #[error("no heteroclinic connection on the fiber: {0}")]
    NoConnection(String),

    #[error("shooting failed: {0}")]
    ShootingFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
