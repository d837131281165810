use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the sampled grid")]
    OutsideGrid { point: Vec<f64> },

    #[error("conjugate is not finite everywhere ({0}); apply an epsilon perturbation first")]
    NotCoercive(String),

    #[error(
        "inner minimization did not converge after {iters} iterations (residual {residual:e})"
    )]
    NoConvergence { iters: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "dual box too small: argmax sits on the primal boundary for {percent:.1}% of dual nodes \
         (affected dual region {lo:.6e}..{hi:.6e} on axis {axis})"
    )]
    DualBoxTooSmall {
        percent: f64,
        axis: usize,
        lo: f64,
        hi: f64,
    },

    #[error("initial condition mismatch: path starts at {found:?}, expected {expected:?}")]
    InitialCondition { expected: Vec<f64>, found: Vec<f64> },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(
        "near-singular shooting matrix (pivot {pivot:e}) for delta1={delta1}, delta2={delta2}, T={horizon}: \
         the linear boundary value problem is resonant"
    )]
    Resonance {
        delta1: f64,
        delta2: f64,
        horizon: f64,
        pivot: f64,
    },

    #[error("config error at `{location}`: {message}")]
    Config { location: String, message: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
