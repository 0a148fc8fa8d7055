use nalgebra::Complex;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("state is not faithful (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotFaithful { min_eigenvalue: f64 },

    #[error("not a density matrix: {0}")]
    NotAState(String),

    #[error("dominant eigenvalue {value} is not simple: {reason}")]
    DegenerateDominant { value: Complex<f64>, reason: String },

    #[error("kernel has dimension {0}, expected 1")]
    KernelDimension(usize),

    #[error("observable is not centered: rho(X) = {0:.3e}")]
    NotCentered(f64),

    #[error("singular restricted system (residual {0:.3e})")]
    Singular(f64),

    #[error("detailed balance violated (residual {0:.3e})")]
    DetailedBalance(f64),

    #[error("numerical cross-check failed: {0}")]
    CrossCheck(String),

    #[error("scan box too small: {0}")]
    ScanBoxTooSmall(String),

    #[error("trajectory failure after {events} events: {reason}")]
    Trajectory { events: usize, reason: String },

    #[error("invalid model at {path}: {message}")]
    Model { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("model is not at equilibrium: {0}")]
    NotEquilibrium(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn model(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Model { path: path.into(), message: message.into() }
    }

    /// Exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 4,
            Error::Json(_)
            | Error::Model { .. }
            | Error::InvalidArgument(_)
            | Error::NotEquilibrium(_)
            | Error::Hypothesis(_)
            | Error::NotHermitian { .. }
            | Error::NotAState(_)
            | Error::DetailedBalance(_) => 2,
            _ => 3,
        }
    }
}
