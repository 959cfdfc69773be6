use thiserror::Error;

use crate::oracle::StabilityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate network: sum of admittances is zero")]
    DegenerateNetwork,

    #[error("simulation aborted at t = {t} s: {reason}")]
    SimulationAbort { t: f64, reason: String },

    #[error("steady-state iteration diverged after {iterations} iterations ({reason})")]
    Divergence {
        iterations: usize,
        reason: String,
        report: Box<StabilityReport>,
    },

    #[error("infeasible calibration target: {0}")]
    InfeasibleTarget(String),

    #[error("{0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
