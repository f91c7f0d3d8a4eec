use thiserror::Error;

/// Reasons an equilibrium or solver input is rejected as infeasible.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Infeasibility {
    #[error("rho + muM - sigmaM^2 = {value} must be positive")]
    NonPositiveRateGap { value: f64 },
    #[error("sigma = {sigma} must exceed sqrt(rho + muM - sigmaM^2) = {bound}")]
    VolatilityTooSmall { sigma: f64, bound: f64 },
    #[error("no contract met the participation bound; best penalty {best_penalty}, agent cost {agent_cost} > kappa {kappa}")]
    Participation {
        best_penalty: f64,
        agent_cost: f64,
        kappa: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("integration produced a non-finite state at t = {t}")]
    IntegrationBlowup { t: f64 },

    #[error("no convergence after {} iterations, last residual {residual:e}", history.len())]
    NonConvergence { residual: f64, history: Vec<f64> },

    #[error("infeasible: {0}")]
    Infeasible(#[from] Infeasibility),

    #[error("adjoint must stay negative, found Y = {value} at t = {t}")]
    InvalidAdjoint { t: f64, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Residual history carried by a non-convergence error.
    pub fn residual_history(&self) -> Option<&[f64]> {
        match self {
            Error::NonConvergence { history, .. } => Some(history),
            _ => None,
        }
    }
}
