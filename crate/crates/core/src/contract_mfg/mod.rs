//! Finite-state principal–agent mean field game.
//!
//! Agents control the intensity of their own jumps at a quadratic effort
//! cost; a principal pays a running stream and a terminal amount per state
//! to steer the population. Values `u_i(t)` are expected remaining costs,
//! so payments lower them: `u_i(T) = −ξ_i` and the running payment enters
//! with a minus sign.

mod chain;
mod epidemic;
mod forward;
mod model;
mod nash;
mod principal;

pub use chain::{chain_occupancy, simulate_chain, thinning_bound};
pub use epidemic::{build_epidemic_model, swap_cities, EpidemicParams, LinearRate, AH, AI, BH, BI};
pub use forward::{
    forward_control_value, principal_forward_control, ForwardControlPath, ForwardControlResult,
    ForwardControlSpec, Sensitivity,
};
pub use model::{
    build_q_matrix, minimize_hamiltonian, Contract, FiniteStateModel, FlowCostFn, HamiltonianMin,
    PaymentUtility, PrincipalSpec, RateFn, StateCostFn, TerminalCostFn,
};
pub use nash::{
    backward_sweep, compare_plain_nash, evaluate_contract, forward_sweep, solve_nash,
    ContractEvaluation, MfgEquilibrium, NashConfig, PlainNashComparison, RegimeReport,
};
pub use principal::{optimize_contract, ContractOptimum, ContractSearch};
