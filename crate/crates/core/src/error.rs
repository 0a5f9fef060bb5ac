use thiserror::Error;

use crate::ba_solver::BaResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported argument: {0}")]
    UnsupportedArgument(String),

    #[error("series did not converge within {terms} terms: {what}")]
    Convergence { what: String, terms: usize },

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("divergent moment: p = {p} must be below alpha = {alpha}")]
    DivergentMoment { p: f64, alpha: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("density is not normalized: mass = {mass}")]
    InconsistentDensity { mass: f64 },

    #[error("incompatible stability exponents: {0} vs {1}")]
    IncompatibleStability(f64, f64),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("Blahut-Arimoto did not converge after {} iterations (gap {:.3e})", .0.iterations, .0.gap)]
    BaNonConvergence(Box<BaResult>),

    #[error("config error at line {line}, field `{field}`: {reason}")]
    Config {
        line: usize,
        field: String,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
