//! The principal's problem with the agent's value run forward in time.
//!
//! For a deterministic per-state sensitivity `ζ(t)` and payment stream, the
//! agent's value process has drift `−Ĥ_i − (Q⁰ζ)_i + u(r)` in state `i` and
//! jumps by `ζ_j − ζ_i` on a move `i → j`. Its state-split means
//! `y_i = E[Y·1{X=i}]` solve
//!
//! ```text
//! ẏ_i = p_i(−Ĥ_i − (Q⁰ζ)_i + u(r)) + Σ_{k≠i} q_ki (y_k + p_k(ζ_i − ζ_k)) − y_i Σ_{j≠i} q_ij
//! ```
//!
//! jointly with `ṗ = Qᵀp`, from `y(0) = Y₀·p°`. The terminal payment is
//! `−Y_T`, so the regulator pays `−Σ y_i(T)` on average.

use crate::error::{Error, Infeasibility, Result};
use crate::numerics::{nelder_mead, rk4_step, trapezoid, Bounds, NelderMeadConfig, TimeGrid};

use super::model::{knot_value, FiniteStateModel, PrincipalSpec};
use super::nash::{hamiltonians, lerp_into, project_simplex, unit_generator_apply, Workspace};

use serde::{Deserialize, Serialize};

/// Sensitivity of the agent's value to the state.
#[derive(Debug, Clone, PartialEq)]
pub enum Sensitivity {
    /// Piecewise constant on uniform knots; entry `k·m + i`.
    Knots { count: usize, values: Vec<f64> },
    /// Nodal values on the integration grid, linear in between; entry `k·m + i`.
    Nodes(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardControlPath {
    pub grid: TimeGrid,
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    /// Mean terminal payment `−Σ y_i(T)`.
    pub terminal_payment: f64,
    pub value: f64,
}

/// Integrates `(p, y)` forward and returns the regulator cost
/// `∫(c₀ + r) + C₀(p_T) − Σ y_i(T)`.
///
/// Knot-valued controls are frozen at each step midpoint.
pub fn forward_control_value(
    model: &FiniteStateModel,
    principal: &PrincipalSpec,
    zeta: &Sensitivity,
    r_knots: &[f64],
    y0: f64,
    steps: usize,
) -> Result<ForwardControlPath> {
    model.validate()?;
    if r_knots.is_empty() || r_knots.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::param(
            "r_knots",
            "need at least one nonnegative payment",
        ));
    }
    let m = model.m;
    let grid = TimeGrid::new(0.0, model.horizon, steps)?;
    let n = grid.node_count();
    match zeta {
        Sensitivity::Knots { count, values } if *count == 0 || values.len() != count * m => {
            return Err(Error::param("zeta", format!("need {m} values per knot")))
        }
        Sensitivity::Nodes(values) if values.len() != n * m => {
            return Err(Error::param("zeta", format!("need {} nodal values", n * m)))
        }
        _ => {}
    }
    let h = grid.h();
    let mut ws = Workspace::new(m);
    let mut hbuf = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut q = vec![0.0; m * m];
    let mut p = vec![0.0; n * m];
    let mut y = vec![0.0; n * m];
    let mut state: Vec<f64> = model
        .p0
        .iter()
        .copied()
        .chain(model.p0.iter().map(|w| w * y0))
        .collect();
    p[..m].copy_from_slice(&model.p0);
    y[..m].copy_from_slice(&state[m..]);
    let mut next = vec![0.0; 2 * m];

    for k in 0..n - 1 {
        let t0 = grid.time(k);
        let mid = t0 + 0.5 * h;
        let pay = model.utility.eval(knot_value(r_knots, mid, model.horizon));
        let mut field = |t: f64, s: &[f64], ds: &mut [f64]| {
            match zeta {
                Sensitivity::Knots { count, values } => {
                    let j = super::model::knot_index(*count, mid, model.horizon);
                    z.copy_from_slice(&values[j * m..(j + 1) * m]);
                }
                Sensitivity::Nodes(values) => lerp_into(
                    &values[k * m..(k + 1) * m],
                    &values[(k + 1) * m..(k + 2) * m],
                    ((t - t0) / h).clamp(0.0, 1.0),
                    &mut z,
                ),
            }
            let (pp, yy) = s.split_at(m);
            ws.p.copy_from_slice(pp);
            hamiltonians(model, t, &z, &mut ws, &mut hbuf);
            model.assemble(t, &ws.alpha, pp, &mut q);
            let (dp, dy) = ds.split_at_mut(m);
            for i in 0..m {
                dp[i] = (0..m).map(|a| pp[a] * q[a * m + i]).sum();
                let mut v =
                    pp[i] * (-hbuf[i] - unit_generator_apply(&z, i) + pay) + yy[i] * q[i * m + i];
                for a in (0..m).filter(|a| *a != i) {
                    v += q[a * m + i] * (yy[a] + pp[a] * (z[i] - z[a]));
                }
                dy[i] = v;
            }
        };
        rk4_step(&mut field, t0, &state, h, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup {
                t: grid.time(k + 1),
            });
        }
        project_simplex(&mut next[..m]);
        std::mem::swap(&mut state, &mut next);
        p[(k + 1) * m..(k + 2) * m].copy_from_slice(&state[..m]);
        y[(k + 1) * m..(k + 2) * m].copy_from_slice(&state[m..]);
    }

    let c0: Vec<f64> = (0..n)
        .map(|k| (principal.c0)(grid.time(k), &p[k * m..(k + 1) * m]))
        .collect();
    let terminal_payment = -state[m..].iter().sum::<f64>();
    let paid = model.horizon * r_knots.iter().sum::<f64>() / r_knots.len() as f64;
    let value = trapezoid(&c0, h) + paid + (principal.terminal)(&state[..m]) + terminal_payment;
    Ok(ForwardControlPath {
        grid,
        p,
        y,
        terminal_payment,
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardControlSpec {
    pub z_knots: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub r_knots: usize,
    pub r_max: f64,
    pub steps: usize,
    pub max_evals: usize,
    pub restarts: usize,
}

impl Default for ForwardControlSpec {
    fn default() -> Self {
        Self {
            z_knots: 8,
            z_lo: -3.0,
            z_hi: 3.0,
            r_knots: 8,
            r_max: 1.0,
            steps: 200,
            max_evals: 4000,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardControlResult {
    pub value: f64,
    pub zeta: Sensitivity,
    pub r_knots: Vec<f64>,
    pub y0: f64,
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Simplex search over piecewise-constant `ζ` and payment knots with the
/// agent's initial value fixed at `y0 ≤ κ`.
pub fn principal_forward_control(
    model: &FiniteStateModel,
    principal: &PrincipalSpec,
    spec: &ForwardControlSpec,
    y0: f64,
) -> Result<ForwardControlResult> {
    model.validate()?;
    if y0 > principal.kappa {
        return Err(Infeasibility::Participation {
            best_penalty: y0 - principal.kappa,
            agent_cost: y0,
            kappa: principal.kappa,
        }
        .into());
    }
    if spec.z_knots == 0 || spec.r_knots == 0 || !(spec.z_lo <= spec.z_hi) || !(spec.r_max >= 0.0) {
        return Err(Error::param(
            "forward_control",
            "need knots ≥ 1 and ordered bounds",
        ));
    }
    let m = model.m;
    let nz = spec.z_knots * m;
    let mut lo = vec![spec.z_lo; nz];
    let mut hi = vec![spec.z_hi; nz];
    lo.extend(std::iter::repeat_n(0.0, spec.r_knots));
    hi.extend(std::iter::repeat_n(spec.r_max, spec.r_knots));
    let bounds = Bounds::new(lo, hi)?;
    let split = |x: &[f64]| {
        (
            Sensitivity::Knots {
                count: spec.z_knots,
                values: x[..nz].to_vec(),
            },
            x[nz..].to_vec(),
        )
    };
    let objective = |x: &[f64]| {
        let (zeta, r) = split(x);
        forward_control_value(model, principal, &zeta, &r, y0, spec.steps)
            .map(|path| path.value)
            .unwrap_or(f64::INFINITY)
    };
    let x0: Vec<f64> = (0..bounds.dim())
        .map(|i| 0.0f64.clamp(bounds.lo[i], bounds.hi[i]))
        .collect();
    let cfg = NelderMeadConfig {
        max_evals: spec.max_evals,
        restarts: spec.restarts,
        ..NelderMeadConfig::default()
    };
    let res = nelder_mead(objective, &x0, &bounds, &cfg)?;
    let (zeta, r_knots) = split(&res.x);
    Ok(ForwardControlResult {
        value: res.value,
        zeta,
        r_knots,
        y0,
        trace: res.trace,
        evaluations: res.evaluations,
    })
}
