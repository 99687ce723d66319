use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate mesh: the polynomial degree must be at least 1")]
    DegenerateMesh,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("`{expr}` is not differentiable here: {reason}")]
    NonDifferentiable { expr: String, reason: String },

    #[error("Newton iteration failed to converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),

    #[error("D - λI is ill-conditioned at λ = {lambda} (condition estimate {condition:e})")]
    IllConditioned { lambda: Complex64, condition: f64 },

    #[error("characteristic matrix is singular at λ = {0}")]
    SingularCharacteristic(Complex64),

    #[error("root is not simple: |D₁Δ| = {0:e}")]
    NotSimple(f64),

    #[error("transversality condition fails: {0}")]
    NotTransversal(String),

    #[error("eigenvector residual {0:e} exceeds tolerance")]
    Residual(f64),

    #[error("QR iteration did not converge ({} of {size} eigenvalues found)", partial.len())]
    EigenNoConvergence { size: usize, partial: Vec<Complex64> },

    #[error("{0}")]
    Domain(String),

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, state: Vec<f64> },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("signal is not oscillatory ({crossings} mean-level crossings)")]
    NotOscillatory { crossings: usize },

    #[error("signal is not periodic (relative spread of crossing spacings {spread:.3})")]
    NotPeriodic { spread: f64 },

    #[error("no period jump between {lo} and {hi}")]
    NoPeriodJump { lo: f64, hi: f64 },

    #[error("continuation step underflow after {points} points (last point {last:?})")]
    ContinuationUnderflow { points: usize, last: [f64; 3] },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable snake_case identifier, used for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateMesh => "degenerate_mesh",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Syntax { .. } => "syntax",
            Error::UnknownFunction(_) => "unknown_function",
            Error::UnknownSymbol(_) => "unknown_symbol",
            Error::InvalidModel(_) => "invalid_model",
            Error::UnknownParameter(_) => "unknown_parameter",
            Error::NonDifferentiable { .. } => "non_differentiable",
            Error::NoConvergence { .. } => "no_convergence",
            Error::SingularJacobian(_) => "singular_jacobian",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::SingularCharacteristic(_) => "singular_characteristic",
            Error::NotSimple(_) => "not_simple",
            Error::NotTransversal(_) => "not_transversal",
            Error::Residual(_) => "residual",
            Error::EigenNoConvergence { .. } => "eigen_no_convergence",
            Error::Domain(_) => "domain",
            Error::StepUnderflow { .. } => "step_underflow",
            Error::NonFinite { .. } => "non_finite",
            Error::NotOscillatory { .. } => "not_oscillatory",
            Error::NotPeriodic { .. } => "not_periodic",
            Error::NoPeriodJump { .. } => "no_period_jump",
            Error::ContinuationUnderflow { .. } => "continuation_underflow",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
