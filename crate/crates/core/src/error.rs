use thiserror::Error;

/// Errors raised by the state constructors, estimators and pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("g2 undefined near vacuum: mean photon number {mean_photon:e} is below guard {epsilon:e}")]
    NearVacuum { mean_photon: f64, epsilon: f64 },

    #[error("quadrature grid too small: normalization deficit {deficit:e}")]
    GridTooSmall { deficit: f64 },

    #[error("photon-number truncation: tail mass {tail_mass:e} exceeds {tol:e}; try n_max >= {suggested_n_max}")]
    Truncation {
        tail_mass: f64,
        tol: f64,
        suggested_n_max: usize,
    },

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("angle set cannot identify the covariance: {0}")]
    Identifiability(String),

    #[error("unstable inference: {guarded} of {total} bootstrap members fell below the near-vacuum guard")]
    UnstableInference { guarded: usize, total: usize },

    #[error("fit did not converge after {iterations} iterations (residual norm {residual:e})")]
    FitDivergence { iterations: usize, residual: f64 },

    #[error("input is not a squeezed vacuum: {0}")]
    NotSqueezed(String),

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 2 usage, 3 domain or guard, 4 statistical instability.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Io(_) => 2,
            Error::UnstableInference { .. }
            | Error::InsufficientStatistics(_)
            | Error::FitDivergence { .. } => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
