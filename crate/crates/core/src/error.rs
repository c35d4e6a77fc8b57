use thiserror::Error;

/// Errors raised by the phase-space dynamics library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix dimension {dim} exceeds the configured maximum {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive-definite (smallest eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("step size underflow at t = {t} (h = {step:.3e}); generator is too stiff for the requested tolerance")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("integrator exceeded {max_steps} steps before reaching t = {target}")]
    TooManySteps { max_steps: usize, target: f64 },

    #[error("invalid quantum state: symplectic eigenvalue {min_symplectic_eigenvalue:.12} is below the 1/2 bound")]
    InvalidState { min_symplectic_eigenvalue: f64 },

    #[error("state is not pure (largest symplectic eigenvalue {max_symplectic_eigenvalue:.12})")]
    NotPure { max_symplectic_eigenvalue: f64 },

    #[error("environment state must be centred (|m_E| = {norm:.3e})")]
    NonZeroMean { norm: f64 },

    #[error("flow block is singular at t = {t} (det = {det:.6e}, condition number {condition:.3e})")]
    SingularBlock { t: f64, det: f64, condition: f64 },

    #[error("inequality violated: purity acceleration {value:.6e} is positive")]
    UncertaintyViolation { value: f64 },

    #[error("grid too coarse: {reason}")]
    GridTooCoarse { reason: String },

    #[error("samples do not decay at the grid boundary (boundary/peak = {ratio:.3e})")]
    BoundaryDecay { ratio: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
