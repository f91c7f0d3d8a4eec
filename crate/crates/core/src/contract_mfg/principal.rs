//! The principal's problem over contracts on uniform knots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Infeasibility, Result};
use crate::numerics::{nelder_mead, Bounds, NelderMeadConfig};

use super::model::{Contract, FiniteStateModel, PrincipalSpec};
use super::nash::{evaluate_contract, solve_nash, MfgEquilibrium, NashConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSearch {
    pub r_knots: usize,
    pub r_max: f64,
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub nash: NashConfig,
    pub max_evals: usize,
    pub restarts: usize,
    /// Weight of `max(0, J − κ)²` in the first round; multiplied by 10 per round.
    pub penalty: f64,
    pub penalty_rounds: usize,
    pub violation_tol: f64,
}

impl Default for ContractSearch {
    fn default() -> Self {
        Self {
            r_knots: 8,
            r_max: 1.0,
            xi_lo: -2.0,
            xi_hi: 2.0,
            nash: NashConfig::default(),
            max_evals: 3000,
            restarts: 2,
            penalty: 10.0,
            penalty_rounds: 6,
            violation_tol: 1e-6,
        }
    }
}

impl ContractSearch {
    fn validate(&self) -> Result<()> {
        if self.r_knots == 0 || !(self.r_max >= 0.0) || !(self.xi_lo <= self.xi_hi) {
            return Err(Error::param(
                "contract_search",
                "need knots ≥ 1, r_max ≥ 0, ξ_lo ≤ ξ_hi",
            ));
        }
        if !(self.penalty > 0.0 && self.violation_tol > 0.0) {
            return Err(Error::param(
                "penalty",
                "penalty weight and tolerance must be positive",
            ));
        }
        Ok(())
    }

    fn bounds(&self, m: usize) -> Result<Bounds> {
        let mut lo = vec![0.0; self.r_knots];
        let mut hi = vec![self.r_max; self.r_knots];
        lo.extend(std::iter::repeat_n(self.xi_lo, m));
        hi.extend(std::iter::repeat_n(self.xi_hi, m));
        Bounds::new(lo, hi)
    }

    fn contract(&self, x: &[f64]) -> Contract {
        Contract {
            r_knots: x[..self.r_knots].to_vec(),
            xi: x[self.r_knots..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractOptimum {
    pub contract: Contract,
    /// `V(κ)`: the regulator cost of the returned contract.
    pub value: f64,
    pub agent_cost: f64,
    pub equilibrium: MfgEquilibrium,
    /// Best penalized objective after every Nelder–Mead run.
    pub trace: Vec<f64>,
    pub penalty_weight: f64,
    pub evaluations: usize,
}

/// Shifts every terminal payment up by the participation violation.
///
/// With a linear terminal utility this moves all values by the same amount,
/// so the feedback and the flow are unchanged.
fn close_participation_gap(c: &mut Contract, violation: f64, xi_hi: f64) -> bool {
    if c.xi.iter().any(|x| x + violation > xi_hi) {
        return false;
    }
    for x in c.xi.iter_mut() {
        *x += violation;
    }
    true
}

/// Penalized simplex search over `(r knots, ξ)`.
///
/// Each round runs Nelder–Mead with restarts on `J₀ + w·max(0, J − κ)²`
/// from the incumbent; `w` grows tenfold until the violation is below
/// tolerance. A remaining violation is removed by a uniform shift of `ξ`
/// when the bounds allow it.
pub fn optimize_contract(
    model: &FiniteStateModel,
    principal: &PrincipalSpec,
    search: &ContractSearch,
) -> Result<ContractOptimum> {
    model.validate()?;
    search.validate()?;
    let m = model.m;
    let bounds = search.bounds(m)?;
    let kappa = principal.kappa;
    let objective = |x: &[f64], w: f64| -> (f64, f64) {
        let c = search.contract(x);
        match solve_nash(model, &c, &search.nash) {
            Ok(eq) => {
                let ev = evaluate_contract(model, principal, &c, &eq);
                let v = (ev.agent_cost - kappa).max(0.0);
                (ev.principal_cost + w * v * v, v)
            }
            Err(_) => (f64::INFINITY, f64::INFINITY),
        }
    };

    let mut x: Vec<f64> = (0..bounds.dim())
        .map(|i| 0.0f64.clamp(bounds.lo[i], bounds.hi[i]))
        .collect();
    let mut w = search.penalty;
    let mut trace = Vec::new();
    let mut evaluations = 0;
    let mut best_penalized = f64::INFINITY;
    for round in 0..=search.penalty_rounds {
        let cfg = NelderMeadConfig {
            max_evals: search.max_evals,
            restarts: search.restarts,
            ..NelderMeadConfig::default()
        };
        let res = nelder_mead(|y| objective(y, w).0, &x, &bounds, &cfg)?;
        evaluations += res.evaluations;
        trace.extend(&res.trace);
        x = res.x;
        best_penalized = res.value;
        let (_, violation) = objective(&x, w);
        if violation <= search.violation_tol || round == search.penalty_rounds {
            break;
        }
        w *= 10.0;
    }

    let mut contract = search.contract(&x);
    let mut eq = solve_nash(model, &contract, &search.nash)?;
    let violation = eq.agent_cost - kappa;
    if violation > 0.0 && close_participation_gap(&mut contract, violation, search.xi_hi) {
        eq = solve_nash(model, &contract, &search.nash)?;
    }
    if eq.agent_cost > kappa + search.violation_tol {
        return Err(Infeasibility::Participation {
            best_penalty: best_penalized,
            agent_cost: eq.agent_cost,
            kappa,
        }
        .into());
    }
    let ev = evaluate_contract(model, principal, &contract, &eq);
    Ok(ContractOptimum {
        contract,
        value: ev.principal_cost,
        agent_cost: ev.agent_cost,
        equilibrium: eq,
        trace,
        penalty_weight: w,
        evaluations,
    })
}
