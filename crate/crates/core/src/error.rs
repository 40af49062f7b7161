use thiserror::Error;

use crate::exprlang::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure of an ODE integration. Optimizers treat these as infeasible trial points.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("maximum number of integration steps ({0}) exceeded")]
    StepLimit(usize),
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("non-finite state at t = {t} (parameters {theta:?})")]
    NonFinite { t: f64, theta: Vec<f64> },
    #[error("right-hand side evaluation failed at t = {t}: {source}")]
    Rhs { t: f64, source: ExprError },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("in {context}: {source}")]
    ExprIn { context: String, source: ExprError },
    #[error("model schema: {0}")]
    Schema(String),
    #[error("parameter bounds: {0}")]
    Bounds(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("invalid noise level sigma = {sigma} for data point {index}")]
    InvalidSigma { index: usize, sigma: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("optimization failed: {0}")]
    OptimizationFailed(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the trial parameters themselves, which an
    /// optimizer should reject rather than abort on.
    pub fn is_infeasible_point(&self) -> bool {
        matches!(
            self,
            Error::Integration(_) | Error::InvalidSigma { .. } | Error::Expr(_) | Error::ExprIn { .. }
        )
    }
}
