//! Forward–backward Nash solver, contract evaluation and the plain-Nash comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{rk4_step, solve_fixed_point, trapezoid, FixedPointConfig, TimeGrid};

use super::model::{hamiltonian_in_state, Contract, FiniteStateModel, PrincipalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashConfig {
    pub steps: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NashConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            damping: 0.5,
            tol: 1e-8,
            max_iter: 2000,
        }
    }
}

/// Node-major flows on the solver grid: entry `k·m + i` is state `i` at node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfgEquilibrium {
    pub grid: TimeGrid,
    pub m: usize,
    pub p: Vec<f64>,
    /// Expected remaining cost given the current state.
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub agent_cost: f64,
    pub residual: f64,
    pub residuals: Vec<f64>,
    /// Largest correction applied by the simplex projection in the last forward sweep.
    pub projection: f64,
    pub rate_violations: usize,
}

impl MfgEquilibrium {
    pub fn p_at(&self, k: usize) -> &[f64] {
        &self.p[k * self.m..(k + 1) * self.m]
    }

    pub fn u_at(&self, k: usize) -> &[f64] {
        &self.u[k * self.m..(k + 1) * self.m]
    }

    pub fn alpha_at(&self, k: usize) -> &[f64] {
        &self.alpha[k * self.m..(k + 1) * self.m]
    }

    pub fn terminal_p(&self) -> &[f64] {
        self.p_at(self.grid.steps())
    }

    /// `max_k |Σ_i p_i(t_k) − 1|`.
    pub fn simplex_error(&self) -> f64 {
        self.p
            .chunks(self.m)
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn lerp_into(a: &[f64], b: &[f64], w: f64, out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = (1.0 - w) * x + w * y;
    }
}

/// Scratch space for one evaluation of the value field.
pub(crate) struct Workspace {
    pub p: Vec<f64>,
    pub c1: Vec<f64>,
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Workspace {
    pub fn new(m: usize) -> Self {
        Self {
            p: vec![0.0; m],
            c1: vec![0.0; m],
            q: vec![0.0; m * m],
            alpha: vec![0.0; m],
        }
    }
}

/// Fills `ws.alpha` and returns each state's `Ĥ` (payment excluded) for the given `p` in `ws.p`.
#[allow(clippy::needless_range_loop)]
pub(crate) fn hamiltonians(
    model: &FiniteStateModel,
    t: f64,
    z: &[f64],
    ws: &mut Workspace,
    h: &mut [f64],
) {
    let m = model.m;
    (model.c1)(t, &ws.p, &mut ws.c1);
    (model.base_rates)(t, &ws.p, &mut ws.q);
    for i in 0..m {
        let min = hamiltonian_in_state(model, i, ws.c1[i], &ws.q[i * m..(i + 1) * m], z);
        ws.alpha[i] = min.alpha;
        h[i] = min.value;
    }
}

/// `Σ_j q⁰_ij z_j` for the unit-rate generator.
pub(crate) fn unit_generator_apply(z: &[f64], i: usize) -> f64 {
    z.iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, v)| v - z[i])
        .sum()
}

/// Backward sweep for the values given the population flow.
///
/// `u̇_i = −[Ĥ_i + (Q⁰u)_i − u(r_t)]` from `u_i(T) = −ξ_i`; the payment is
/// frozen at the midpoint of each step. Returns `(u, α̂)` node-major.
pub fn backward_sweep(
    model: &FiniteStateModel,
    contract: &Contract,
    grid: &TimeGrid,
    p_flow: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = model.m;
    let n = grid.node_count();
    let h = grid.h();
    let mut u = vec![0.0; n * m];
    let mut alpha = vec![0.0; n * m];
    let mut ws = Workspace::new(m);
    let mut hbuf = vec![0.0; m];
    let mut y: Vec<f64> = contract.xi.iter().map(|x| -x).collect();
    let mut next = vec![0.0; m];
    let mut store = |k: usize, y: &[f64], ws: &mut Workspace, hbuf: &mut [f64]| {
        ws.p.copy_from_slice(&p_flow[k * m..(k + 1) * m]);
        hamiltonians(model, grid.time(k), y, ws, hbuf);
        u[k * m..(k + 1) * m].copy_from_slice(y);
        alpha[k * m..(k + 1) * m].copy_from_slice(&ws.alpha);
    };
    store(n - 1, &y, &mut ws, &mut hbuf);
    for k in (0..n - 1).rev() {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let pay = model
            .utility
            .eval(contract.payment(0.5 * (t0 + t1), model.horizon));
        let (pa, pb) = (
            &p_flow[k * m..(k + 1) * m],
            &p_flow[(k + 1) * m..(k + 2) * m],
        );
        let mut field = |t: f64, z: &[f64], dz: &mut [f64]| {
            lerp_into(pa, pb, ((t - t0) / h).clamp(0.0, 1.0), &mut ws.p);
            hamiltonians(model, t, z, &mut ws, &mut hbuf);
            for i in 0..m {
                dz[i] = -(hbuf[i] + unit_generator_apply(z, i) - pay);
            }
        };
        rk4_step(&mut field, t1, &y, -h, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup { t: t0 });
        }
        std::mem::swap(&mut y, &mut next);
        store(k, &y, &mut ws, &mut hbuf);
    }
    Ok((u, alpha))
}

/// Clips negative weights and renormalizes; returns the sup-norm correction.
pub(crate) fn project_simplex(p: &mut [f64]) -> f64 {
    let before = p.to_vec();
    for v in p.iter_mut() {
        *v = v.max(0.0);
    }
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        for v in p.iter_mut() {
            *v /= s;
        }
    }
    p.iter()
        .zip(&before)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// RK4 on `ṗ = Qᵀ(t, α̂, p) p` from `p°`, actions interpolated linearly in time.
///
/// Returns the node-major flow and the largest projection correction.
pub fn forward_sweep(
    model: &FiniteStateModel,
    grid: &TimeGrid,
    alpha: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let m = model.m;
    let n = grid.node_count();
    let h = grid.h();
    let mut p = vec![0.0; n * m];
    p[..m].copy_from_slice(&model.p0);
    let mut a = vec![0.0; m];
    let mut q = vec![0.0; m * m];
    let mut y = model.p0.clone();
    let mut next = vec![0.0; m];
    let mut projection = 0.0f64;
    for k in 0..n - 1 {
        let t0 = grid.time(k);
        let (aa, ab) = (&alpha[k * m..(k + 1) * m], &alpha[(k + 1) * m..(k + 2) * m]);
        let mut field = |t: f64, x: &[f64], dx: &mut [f64]| {
            lerp_into(aa, ab, ((t - t0) / h).clamp(0.0, 1.0), &mut a);
            model.assemble(t, &a, x, &mut q);
            for j in 0..m {
                dx[j] = (0..m).map(|i| x[i] * q[i * m + j]).sum();
            }
        };
        rk4_step(&mut field, t0, &y, h, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup {
                t: grid.time(k + 1),
            });
        }
        projection = projection.max(project_simplex(&mut next));
        std::mem::swap(&mut y, &mut next);
        p[(k + 1) * m..(k + 2) * m].copy_from_slice(&y);
    }
    Ok((p, projection))
}

fn count_rate_violations(
    model: &FiniteStateModel,
    grid: &TimeGrid,
    eq_p: &[f64],
    alpha: &[f64],
) -> usize {
    if model.rate_bounds.is_none() {
        return 0;
    }
    let m = model.m;
    let mut q = vec![0.0; m * m];
    (0..grid.node_count())
        .map(|k| {
            model.assemble(
                grid.time(k),
                &alpha[k * m..(k + 1) * m],
                &eq_p[k * m..(k + 1) * m],
                &mut q,
            );
            model.bound_violations(&q)
        })
        .sum()
}

/// Damped iteration on the population flow, starting from `p(t) ≡ p°`.
///
/// One map evaluation is a backward sweep for the values under the current
/// flow followed by a forward sweep under the resulting feedback. The
/// returned flow is the forward sweep of the accepted iterate, so it is the
/// exact law of the chain under the returned feedback.
pub fn solve_nash(
    model: &FiniteStateModel,
    contract: &Contract,
    cfg: &NashConfig,
) -> Result<MfgEquilibrium> {
    model.validate()?;
    contract.validate(model.m)?;
    let grid = TimeGrid::new(0.0, model.horizon, cfg.steps)?;
    let fp = FixedPointConfig::new(cfg.damping, cfg.tol, cfg.max_iter)?;
    let x0: Vec<f64> = (0..grid.node_count())
        .flat_map(|_| model.p0.iter().copied())
        .collect();
    let outcome = solve_fixed_point(
        |flow| {
            let (_, alpha) = backward_sweep(model, contract, &grid, flow)?;
            Ok(forward_sweep(model, &grid, &alpha)?.0)
        },
        x0,
        &fp,
    )?;
    let (_, alpha_x) = backward_sweep(model, contract, &grid, &outcome.value)?;
    let (p, projection) = forward_sweep(model, &grid, &alpha_x)?;
    let (u, alpha) = backward_sweep(model, contract, &grid, &p)?;
    let agent_cost = model.p0.iter().zip(&u[..model.m]).map(|(a, b)| a * b).sum();
    let rate_violations = count_rate_violations(model, &grid, &p, &alpha);
    Ok(MfgEquilibrium {
        grid,
        m: model.m,
        p,
        u,
        alpha,
        agent_cost,
        residual: *outcome.residuals.last().unwrap_or(&0.0),
        residuals: outcome.residuals,
        projection,
        rate_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractEvaluation {
    pub agent_cost: f64,
    pub principal_cost: f64,
    pub feasible: bool,
}

/// Regulator cost `∫(c₀ + r) + C₀(p_T) + Σ p_i(T) ξ_i` along a flow.
pub(crate) fn principal_cost(
    principal: &PrincipalSpec,
    grid: &TimeGrid,
    m: usize,
    p: &[f64],
    contract: &Contract,
) -> f64 {
    let c0: Vec<f64> = (0..grid.node_count())
        .map(|k| (principal.c0)(grid.time(k), &p[k * m..(k + 1) * m]))
        .collect();
    let pt = &p[grid.steps() * m..];
    trapezoid(&c0, grid.h())
        + contract.total_payment(grid.t1())
        + (principal.terminal)(pt)
        + pt.iter().zip(&contract.xi).map(|(a, b)| a * b).sum::<f64>()
}

/// Agent cost `Σ p°_i u_i(0)` and regulator cost; `∫c₀` by the trapezoid
/// rule, `∫r` exactly for the piecewise-constant stream.
pub fn evaluate_contract(
    model: &FiniteStateModel,
    principal: &PrincipalSpec,
    contract: &Contract,
    eq: &MfgEquilibrium,
) -> ContractEvaluation {
    let j0 = principal_cost(principal, &eq.grid, model.m, &eq.p, contract);
    ContractEvaluation {
        agent_cost: eq.agent_cost,
        principal_cost: j0,
        feasible: eq.agent_cost <= principal.kappa,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub contract: Contract,
    pub agent_cost: f64,
    pub principal_cost: f64,
    pub equilibrium: MfgEquilibrium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainNashComparison {
    pub with_contract: RegimeReport,
    pub plain: RegimeReport,
}

impl PlainNashComparison {
    /// Regulator cost without the contract minus with it.
    pub fn principal_saving(&self) -> f64 {
        self.plain.principal_cost - self.with_contract.principal_cost
    }
}

/// Solves the game with no payments at all and sets it beside the contracted
/// equilibrium. Both utilities vanish at zero payment, so the plain game is
/// the zero contract.
pub fn compare_plain_nash(
    model: &FiniteStateModel,
    principal: &PrincipalSpec,
    contract: &Contract,
    eq: &MfgEquilibrium,
    cfg: &NashConfig,
) -> Result<PlainNashComparison> {
    let zero = Contract::zero(model.m, contract.r_knots.len());
    let plain_eq = solve_nash(model, &zero, cfg)?;
    let plain_eval = evaluate_contract(model, principal, &zero, &plain_eq);
    let eval = evaluate_contract(model, principal, contract, eq);
    Ok(PlainNashComparison {
        with_contract: RegimeReport {
            contract: contract.clone(),
            agent_cost: eval.agent_cost,
            principal_cost: eval.principal_cost,
            equilibrium: eq.clone(),
        },
        plain: RegimeReport {
            contract: zero,
            agent_cost: plain_eval.agent_cost,
            principal_cost: plain_eval.principal_cost,
            equilibrium: plain_eq,
        },
    })
}
