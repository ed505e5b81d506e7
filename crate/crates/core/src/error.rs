use thiserror::Error;

/// Errors raised by the plant model, the state transformation, the controller
/// and the simulation loop.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("diagonal inverse requested for a vector with a zero entry at index {index}")]
    ZeroDiagonal { index: usize },

    #[error("{quantity} component {index} = {value} is outside the open bound ±{bound}")]
    SafeSetViolation {
        quantity: &'static str,
        index: usize,
        value: f64,
        bound: f64,
    },

    #[error("reference position component {index} = {value} is outside the open bound ±{bound}")]
    ReferenceInfeasible {
        index: usize,
        value: f64,
        bound: f64,
    },

    #[error("controller input matrix is singular (|det| = {det:e})")]
    ControllerSingularity { det: f64 },

    #[error("integration produced a non-finite state")]
    IntegrationBlowup,

    #[error("waypoint plan error: {0}")]
    Plan(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
