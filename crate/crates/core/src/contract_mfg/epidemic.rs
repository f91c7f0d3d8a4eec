//! Two cities, each with infected and healthy residents.
//!
//! States are ordered `AI, AH, BI, BH`. Infection and recovery rates depend
//! on the infected share of the own city; moving between cities is the only
//! controlled transition, at rate `ν_I α` for infected and `ν_H α` for
//! healthy agents.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::{check_simplex, FiniteStateModel, PaymentUtility, PrincipalSpec};

pub const AI: usize = 0;
pub const AH: usize = 1;
pub const BI: usize = 2;
pub const BH: usize = 3;

/// `intercept + slope·s` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRate {
    pub intercept: f64,
    pub slope: f64,
}

impl LinearRate {
    pub const fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.intercept + self.slope * s
    }

    fn check(&self, name: &'static str, nonnegative: bool) -> Result<()> {
        if !(self.intercept.is_finite() && self.slope.is_finite()) || self.slope < 0.0 {
            return Err(Error::param(
                name,
                "need finite coefficients and a nonnegative slope",
            ));
        }
        if nonnegative && self.intercept < 0.0 {
            return Err(Error::param(name, "rate must be nonnegative on [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicParams {
    /// Infection rate `AH → AI` in the infected share of city A.
    #[serde(rename = "thetaA_minus")]
    pub theta_a_minus: LinearRate,
    /// Recovery rate `AI → AH` in the healthy share of city A.
    #[serde(rename = "thetaA_plus")]
    pub theta_a_plus: LinearRate,
    #[serde(rename = "thetaB_minus")]
    pub theta_b_minus: LinearRate,
    #[serde(rename = "thetaB_plus")]
    pub theta_b_plus: LinearRate,
    #[serde(rename = "nuI")]
    pub nu_i: f64,
    #[serde(rename = "nuH")]
    pub nu_h: f64,
    #[serde(rename = "phiA")]
    pub phi_a: LinearRate,
    #[serde(rename = "phiB")]
    pub phi_b: LinearRate,
    #[serde(rename = "gammaI")]
    pub gamma_i: f64,
    #[serde(rename = "gammaH")]
    pub gamma_h: f64,
    #[serde(rename = "sigmaA")]
    pub sigma_a: f64,
    #[serde(rename = "sigmaB")]
    pub sigma_b: f64,
    #[serde(rename = "sigmaP")]
    pub sigma_p: f64,
    pub pi0: [f64; 4],
    pub horizon: f64,
    pub alpha_max: f64,
    pub kappa: f64,
    #[serde(default)]
    pub utility: PaymentUtility,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        Self {
            theta_a_minus: LinearRate::new(0.2, 0.8),
            theta_a_plus: LinearRate::new(0.1, 0.3),
            theta_b_minus: LinearRate::new(0.1, 0.4),
            theta_b_plus: LinearRate::new(0.3, 0.3),
            nu_i: 1.0,
            nu_h: 1.0,
            phi_a: LinearRate::new(0.5, 1.5),
            phi_b: LinearRate::new(0.5, 1.5),
            gamma_i: 1.0,
            gamma_h: 1.0,
            sigma_a: 1.0,
            sigma_b: 1.0,
            sigma_p: 1.0,
            pi0: [0.3, 0.3, 0.05, 0.35],
            horizon: 2.0,
            alpha_max: 2.0,
            kappa: 2.5,
            utility: PaymentUtility::Linear,
        }
    }
}

/// Infected share of a city; an empty city counts as uninfected.
fn infected_share(infected: f64, healthy: f64) -> f64 {
    let total = infected + healthy;
    if total > 0.0 {
        (infected / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Swaps the roles of the two cities.
pub fn swap_cities(p: &[f64]) -> [f64; 4] {
    [p[BI], p[BH], p[AI], p[AH]]
}

impl EpidemicParams {
    pub fn validate(&self) -> Result<()> {
        self.theta_a_minus.check("thetaA_minus", true)?;
        self.theta_a_plus.check("thetaA_plus", true)?;
        self.theta_b_minus.check("thetaB_minus", true)?;
        self.theta_b_plus.check("thetaB_plus", true)?;
        self.phi_a.check("phiA", false)?;
        self.phi_b.check("phiB", false)?;
        if !(self.nu_i >= 0.0 && self.nu_h >= 0.0 && self.nu_i.is_finite() && self.nu_h.is_finite())
        {
            return Err(Error::param(
                "nu",
                "migration multipliers must be nonnegative",
            ));
        }
        if !(self.gamma_i > 0.0 && self.gamma_h > 0.0) {
            return Err(Error::param("gamma", "effort weights must be positive"));
        }
        if ![self.sigma_a, self.sigma_b, self.sigma_p, self.kappa]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::param(
                "sigma",
                "regulator weights and kappa must be finite",
            ));
        }
        if !(self.alpha_max >= 0.0 && self.alpha_max.is_finite()) {
            return Err(Error::param("alpha_max", "must be nonnegative"));
        }
        check_simplex("pi0", &self.pi0)
    }
}

/// Model over `{AI, AH, BI, BH}` with actions in `[0, α_max]`, and the
/// regulator with `c₀ = exp(σ_A π_AI + σ_B π_BI)` and
/// `C₀ = σ_P(π_AI + π_AH − π_A⁰)²`.
pub fn build_epidemic_model(params: &EpidemicParams) -> Result<(FiniteStateModel, PrincipalSpec)> {
    params.validate()?;
    let ep = params.clone();
    let base_rates = Arc::new(move |_t: f64, p: &[f64], q: &mut [f64]| {
        q.fill(0.0);
        let sa = infected_share(p[AI], p[AH]);
        let sb = infected_share(p[BI], p[BH]);
        q[AI * 4 + AH] = ep.theta_a_plus.eval(1.0 - sa);
        q[AH * 4 + AI] = ep.theta_a_minus.eval(sa);
        q[BI * 4 + BH] = ep.theta_b_plus.eval(1.0 - sb);
        q[BH * 4 + BI] = ep.theta_b_minus.eval(sb);
    });
    let ep = params.clone();
    let c1 = Arc::new(move |_t: f64, p: &[f64], out: &mut [f64]| {
        let a = ep.phi_a.eval(infected_share(p[AI], p[AH]));
        let b = ep.phi_b.eval(infected_share(p[BI], p[BH]));
        out.copy_from_slice(&[a, a, b, b]);
    });
    let mut lambda = vec![0.0; 16];
    lambda[AI * 4 + BI] = params.nu_i;
    lambda[BI * 4 + AI] = params.nu_i;
    lambda[AH * 4 + BH] = params.nu_h;
    lambda[BH * 4 + AH] = params.nu_h;
    let model = FiniteStateModel {
        m: 4,
        base_rates,
        lambda,
        alpha_lo: 0.0,
        alpha_hi: params.alpha_max,
        c1,
        gamma: vec![
            params.gamma_i,
            params.gamma_h,
            params.gamma_i,
            params.gamma_h,
        ],
        utility: params.utility,
        horizon: params.horizon,
        p0: params.pi0.to_vec(),
        rate_bounds: None,
    };
    model.validate()?;
    let (sa, sb, sp) = (params.sigma_a, params.sigma_b, params.sigma_p);
    let city_a0 = params.pi0[AI] + params.pi0[AH];
    let principal = PrincipalSpec {
        c0: Arc::new(move |_, p| (sa * p[AI] + sb * p[BI]).exp()),
        terminal: Arc::new(move |p| sp * (p[AI] + p[AH] - city_a0).powi(2)),
        kappa: params.kappa,
    };
    Ok((model, principal))
}
