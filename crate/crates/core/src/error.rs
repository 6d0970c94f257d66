use thiserror::Error;

use crate::integrator::IntegratorError;
use crate::linalg::LinalgError;
use crate::model::ModelError;

/// Failures of the reduced and composite dynamics.
#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("integration failed: {0}")]
    Integrator(#[from] IntegratorError),
    #[error("right-hand side is not finite at t = {0}; check model parameters")]
    NonFinite(f64),
    #[error("{0}")]
    InvalidInput(String),
}
