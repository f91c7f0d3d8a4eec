//! Stationary master equation for the value of one unit of real hash rate.
//!
//! The value `U(K)` of a unit of hash rate when the aggregate is `K` solves
//!
//! ```text
//! 0 = −(r+δ)U + (−δK + λU)·U' + (K+ε)⁻¹ − c
//! ```
//!
//! on a truncated domain `[0, K_max]`. Along the aggregate characteristic
//! `K' = −δK + λU(K)` the same value is the discounted integral of the
//! per-unit reward, which gives an independent check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{rk4_step, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    pub r: f64,
    pub delta: f64,
    pub lambda: f64,
    pub eps: f64,
    pub c: f64,
}

impl MiningParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.r, self.delta, self.lambda, self.eps, self.c];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("mining", "all parameters must be finite"));
        }
        if self.delta < 0.0 || self.lambda < 0.0 || self.c < 0.0 {
            return Err(Error::param(
                "mining",
                "delta, lambda and c must be nonnegative",
            ));
        }
        if !(self.r + self.delta > 0.0) {
            return Err(Error::param("r", "r + delta must be positive"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::param(
                "eps",
                format!("{} must be positive", self.eps),
            ));
        }
        Ok(())
    }

    fn discount(&self) -> f64 {
        self.r + self.delta
    }

    /// Per-unit reward `(K+ε)⁻¹ − c`.
    pub fn reward(&self, k: f64) -> f64 {
        1.0 / (k + self.eps) - self.c
    }

    /// Aggregate drift `−δK + λU`.
    pub fn drift(&self, k: f64, u: f64) -> f64 {
        -self.delta * k + self.lambda * u
    }
}

/// Samples of a function on the uniform nodes of `[0, k_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub k_max: f64,
    pub n_cells: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(k_max: f64, n_cells: usize, values: Vec<f64>) -> Result<Self> {
        if !(k_max > 0.0 && k_max.is_finite()) {
            return Err(Error::param("k_max", format!("{k_max} must be positive")));
        }
        if n_cells == 0 {
            return Err(Error::param("n_cells", "must be positive"));
        }
        if values.len() != n_cells + 1 {
            return Err(Error::Domain(format!(
                "{} values for {} cells",
                values.len(),
                n_cells
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid function values must be finite".into()));
        }
        Ok(Self {
            k_max,
            n_cells,
            values,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.k_max / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i >= self.n_cells {
            self.k_max
        } else {
            i as f64 * self.spacing()
        }
    }

    /// Linear interpolation; outside the domain the end value is returned
    /// together with `false`.
    pub fn eval(&self, k: f64) -> (f64, bool) {
        if k <= 0.0 {
            return (self.values[0], k == 0.0);
        }
        if k >= self.k_max {
            return (self.values[self.n_cells], k == self.k_max);
        }
        let s = k / self.spacing();
        let i = (s.floor() as usize).min(self.n_cells - 1);
        let w = s - i as f64;
        ((1.0 - w) * self.values[i] + w * self.values[i + 1], true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterGrid {
    pub k_max: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterSolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// First pseudo-time step; doubled after every accepted step.
    pub dtau0: f64,
    pub dtau_max: f64,
}

impl Default for MasterSolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            dtau0: 1.0,
            dtau_max: 1e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    pub u: GridFunction,
    /// Stationary residual at every node.
    pub residual: Vec<f64>,
    /// Sup-norm residual before each pseudo-time step and after the last.
    pub history: Vec<f64>,
}

impl MasterSolution {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Upwind residual and its tridiagonal Jacobian `(lower, diag, upper)`.
fn residual_and_jacobian(
    p: &MiningParams,
    ks: &[f64],
    u: &[f64],
    h: f64,
    res: &mut [f64],
    jac: Option<(&mut [f64], &mut [f64], &mut [f64])>,
) {
    let n = u.len() - 1;
    let mut jac = jac;
    for i in 0..=n {
        let b = p.drift(ks[i], u[i]);
        let forward = i == 0 || (i < n && b >= 0.0);
        let (d, lo_c, di_c, up_c) = if forward {
            ((u[i + 1] - u[i]) / h, 0.0, -b / h, b / h)
        } else {
            ((u[i] - u[i - 1]) / h, -b / h, b / h, 0.0)
        };
        res[i] = -p.discount() * u[i] + b * d + p.reward(ks[i]);
        if let Some((lo, di, up)) = jac.as_mut() {
            lo[i] = lo_c;
            di[i] = -p.discount() + p.lambda * d + di_c;
            up[i] = up_c;
        }
    }
}

/// Thomas algorithm for a tridiagonal system; `lo[0]` and `up[n]` are ignored.
fn solve_tridiagonal(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = di[0];
    if denom == 0.0 {
        return None;
    }
    c[0] = up[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = di[i] - lo[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { up[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

/// Pseudo-time marching to the stationary solution.
///
/// Each step solves `(I/Δτ − J)ΔU = F(U)` with the upwind residual `F` and
/// its Jacobian `J`, so the march turns into Newton's method as `Δτ` grows.
/// The upwind direction at each node follows the sign of `−δK + λU` at the
/// current iterate; the first node always differences forward and the last
/// backward. The start is `U = ((K+ε)⁻¹ − c)/(r+δ)`.
pub fn solve_stationary_master(
    params: &MiningParams,
    grid: &MasterGrid,
    cfg: &MasterSolverConfig,
) -> Result<MasterSolution> {
    params.validate()?;
    GridFunction::new(grid.k_max, grid.n_cells, vec![0.0; grid.n_cells + 1])?;
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 || !(cfg.dtau0 > 0.0) {
        return Err(Error::param(
            "solver",
            "tol, max_iter and dtau0 must be positive",
        ));
    }
    let n = grid.n_cells;
    let h = grid.k_max / n as f64;
    let ks: Vec<f64> = (0..=n)
        .map(|i| if i == n { grid.k_max } else { i as f64 * h })
        .collect();
    let mut u: Vec<f64> = ks
        .iter()
        .map(|k| params.reward(*k) / params.discount())
        .collect();
    let mut res = vec![0.0; n + 1];
    let (mut lo, mut di, mut up) = (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut history = Vec::new();
    let mut dtau = cfg.dtau0;

    for _ in 0..cfg.max_iter {
        residual_and_jacobian(
            params,
            &ks,
            &u,
            h,
            &mut res,
            Some((&mut lo, &mut di, &mut up)),
        );
        let r = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        history.push(r);
        if !r.is_finite() {
            break;
        }
        if r < cfg.tol {
            return Ok(MasterSolution {
                u: GridFunction::new(grid.k_max, n, u)?,
                residual: res,
                history,
            });
        }
        let shifted: Vec<f64> = di.iter().map(|d| 1.0 / dtau - d).collect();
        let neg_lo: Vec<f64> = lo.iter().map(|v| -v).collect();
        let neg_up: Vec<f64> = up.iter().map(|v| -v).collect();
        let step = match solve_tridiagonal(&neg_lo, &shifted, &neg_up, &res) {
            Some(s) => s,
            None => break,
        };
        for (ui, si) in u.iter_mut().zip(&step) {
            *ui += si;
        }
        dtau = (2.0 * dtau).min(cfg.dtau_max);
    }
    Err(Error::NonConvergence {
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Stationary residual of an arbitrary grid function under the upwind scheme.
pub fn stationary_residual(params: &MiningParams, u: &GridFunction) -> Vec<f64> {
    let ks: Vec<f64> = (0..=u.n_cells).map(|i| u.node(i)).collect();
    let mut res = vec![0.0; u.n_cells + 1];
    residual_and_jacobian(params, &ks, &u.values, u.spacing(), &mut res, None);
    res
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicEstimate {
    pub value: f64,
    /// The characteristic left `[0, K_max]` and `U` was extended by its end values.
    pub extrapolated: bool,
}

/// Discounted reward `∫ e^{−(r+δ)t}((K_t+ε)⁻¹ − c) dt` along `K' = −δK + λU(K)`.
pub fn verify_by_characteristics(
    u: &GridFunction,
    params: &MiningParams,
    k0: f64,
    horizon: f64,
    dt: f64,
) -> Result<CharacteristicEstimate> {
    params.validate()?;
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Error::param("dt", "horizon and dt must be positive"));
    }
    let tail = (-params.discount() * horizon).exp();
    if !(tail < 1e-8) {
        return Err(Error::param(
            "horizon",
            format!("discount factor at the horizon is {tail:e}, need < 1e-8"),
        ));
    }
    let steps = (horizon / dt).ceil() as usize;
    let h = horizon / steps as f64;
    let mut extrapolated = !(0.0..=u.k_max).contains(&k0);
    let mut field = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (uk, inside) = u.eval(y[0]);
        extrapolated |= !inside;
        dy[0] = params.drift(y[0], uk);
        dy[1] = (-params.discount() * t).exp() * params.reward(y[0]);
    };
    let mut y = vec![k0, 0.0];
    let mut next = vec![0.0; 2];
    for s in 0..steps {
        rk4_step(&mut field, s as f64 * h, &y, h, &mut next);
        std::mem::swap(&mut y, &mut next);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup {
                t: (s + 1) as f64 * h,
            });
        }
    }
    Ok(CharacteristicEstimate {
        value: y[1],
        extrapolated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashrateTrajectory {
    pub grid: TimeGrid,
    pub k: Vec<f64>,
    /// The path left `[0, K_max]` and was clamped to it.
    pub clamped: bool,
}

/// RK4 path of the aggregate hash rate under the solved value field.
pub fn hashrate_trajectory(
    u: &GridFunction,
    params: &MiningParams,
    k0: f64,
    horizon: f64,
    steps: usize,
) -> Result<HashrateTrajectory> {
    params.validate()?;
    if !(0.0..=u.k_max).contains(&k0) {
        return Err(Error::Domain(format!("k0 = {k0} outside [0, {}]", u.k_max)));
    }
    let grid = TimeGrid::new(0.0, horizon, steps)?;
    let mut field = |_: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = params.drift(y[0], u.eval(y[0]).0);
    };
    let mut k = Vec::with_capacity(grid.node_count());
    k.push(k0);
    let mut clamped = false;
    let mut y = [k0];
    let mut next = [0.0];
    for s in 0..steps {
        rk4_step(&mut field, grid.time(s), &y, grid.h(), &mut next);
        if !next[0].is_finite() {
            return Err(Error::IntegrationBlowup {
                t: grid.time(s + 1),
            });
        }
        if next[0] < 0.0 || next[0] > u.k_max {
            clamped = true;
            next[0] = next[0].clamp(0.0, u.k_max);
        }
        y = next;
        k.push(y[0]);
    }
    Ok(HashrateTrajectory { grid, k, clamped })
}

/// Root of `−δK + λU(K)` on the interpolated field, if the grid brackets one.
///
/// Returns the first sign change from the left.
pub fn stationary_hashrate(u: &GridFunction, params: &MiningParams) -> Option<f64> {
    let g: Vec<f64> = (0..=u.n_cells)
        .map(|i| params.drift(u.node(i), u.values[i]))
        .collect();
    for i in 0..u.n_cells {
        if g[i] == 0.0 {
            return Some(u.node(i));
        }
        if g[i] * g[i + 1] < 0.0 {
            // the drift is linear within a cell of the interpolant
            let w = g[i] / (g[i] - g[i + 1]);
            return Some(u.node(i) + w * u.spacing());
        }
    }
    (g[u.n_cells] == 0.0).then_some(u.k_max)
}
