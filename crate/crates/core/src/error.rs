use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The minimizing overlap is `q = 0`.
    #[error("trivial phase: the minimizing overlap is q = 0")]
    TrivialPhase,

    #[error("sign scan found {0} roots where exactly one was expected")]
    MultipleRoots(usize),

    #[error("no admissible root: {0}")]
    NoRoot(String),

    #[error("u0 is undefined when both external fields vanish")]
    BothFieldsZero,

    #[error("effective sample size {n_eff:.1} is below the required {required}")]
    ChainTooShort { n_eff: f64, required: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
