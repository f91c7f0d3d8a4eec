use mfg_core::mining::{
    hashrate_trajectory, solve_stationary_master, stationary_hashrate, verify_by_characteristics,
    MasterGrid, MasterSolverConfig, MiningParams,
};
use serde::Deserialize;
use serde_json::json;

use super::{positive, ScenarioOutput, Table};
use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::CsvTable;

fn default_k_max() -> f64 {
    5.0
}

fn default_cells() -> usize {
    2000
}

fn default_k0() -> f64 {
    1.0
}

fn default_trajectory_horizon() -> f64 {
    100.0
}

fn default_checks() -> Vec<f64> {
    vec![1.0, 2.0, 2.5, 3.0, 4.0]
}

fn default_char_dt() -> f64 {
    1e-2
}

fn default_max_iter() -> usize {
    200
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    r: f64,
    delta: f64,
    lambda: f64,
    eps: f64,
    c: f64,
    #[serde(default = "default_k_max")]
    k_max: f64,
    #[serde(default = "default_cells")]
    n_cells: usize,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default = "default_k0")]
    k0: f64,
    #[serde(default = "default_trajectory_horizon")]
    horizon: f64,
    /// Points where the solved field is checked along characteristics.
    #[serde(default = "default_checks")]
    check_points: Vec<f64>,
    /// Defaults to the shortest horizon with discount factor below 1e-9.
    #[serde(default)]
    check_horizon: Option<f64>,
    #[serde(default = "default_char_dt")]
    check_dt: f64,
}

pub(super) struct Settings {
    params: MiningParams,
    grid: MasterGrid,
    solver: MasterSolverConfig,
    k0: f64,
    horizon: f64,
    steps: usize,
    checks: Vec<f64>,
    check_horizon: f64,
    check_dt: f64,
}

pub(super) fn settings(cfg: &ScenarioConfig) -> Result<Settings, CliError> {
    let p: Params = cfg.params()?;
    let params = MiningParams {
        r: p.r,
        delta: p.delta,
        lambda: p.lambda,
        eps: p.eps,
        c: p.c,
    };
    params.validate()?;
    if !(p.k_max > 0.0 && p.k_max.is_finite()) {
        return Err(CliError::Schema("params.k_max: must be positive".into()));
    }
    if !(0.0..=p.k_max).contains(&p.k0) {
        return Err(CliError::Schema(format!(
            "params.k0: {} outside [0, {}]",
            p.k0, p.k_max
        )));
    }
    if let Some(k) = p
        .check_points
        .iter()
        .find(|k| !(0.0..=p.k_max).contains(*k))
    {
        return Err(CliError::Schema(format!(
            "params.check_points: {k} outside [0, {}]",
            p.k_max
        )));
    }
    if !(p.horizon > 0.0) {
        return Err(CliError::Schema("params.horizon: must be positive".into()));
    }
    let check_horizon = p
        .check_horizon
        .unwrap_or((9.0 * 10f64.ln() / (p.r + p.delta)).ceil());
    Ok(Settings {
        params,
        grid: MasterGrid {
            k_max: p.k_max,
            n_cells: positive("params.n_cells", p.n_cells)?,
        },
        solver: MasterSolverConfig {
            tol: cfg.tol_or(1e-10)?,
            max_iter: positive("params.max_iter", p.max_iter)?,
            ..Default::default()
        },
        k0: p.k0,
        horizon: p.horizon,
        steps: cfg.steps_or(1000)?,
        checks: p.check_points,
        check_horizon,
        check_dt: p.check_dt,
    })
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let s = settings(cfg)?;
    let sol = solve_stationary_master(&s.params, &s.grid, &s.solver)?;
    let u = &sol.u;
    let mut value = CsvTable::new(["K", "U", "residual"]);
    for (i, (v, r)) in u.values.iter().zip(&sol.residual).enumerate() {
        value.push(vec![u.node(i), *v, *r]);
    }
    let path = hashrate_trajectory(u, &s.params, s.k0, s.horizon, s.steps)?;
    let trajectory = CsvTable::from_columns(vec![
        ("t".into(), path.grid.times()),
        ("K".into(), path.k.clone()),
    ]);

    let mut checks = Vec::with_capacity(s.checks.len());
    let mut worst = 0.0f64;
    for &k in &s.checks {
        let est = verify_by_characteristics(u, &s.params, k, s.check_horizon, s.check_dt)?;
        let solved = u.eval(k).0;
        worst = worst.max((est.value - solved).abs());
        checks.push(json!({
            "k": k,
            "grid_value": solved,
            "characteristic_value": est.value,
            "difference": est.value - solved,
            "extrapolated": est.extrapolated,
        }));
    }
    let max_residual = sol.max_residual();
    Ok(ScenarioOutput {
        tables: vec![
            Table::new("value.csv", value.render()),
            Table::new("trajectory.csv", trajectory.render()),
        ],
        summary: json!({
            "max_residual": max_residual,
            "pseudo_time_steps": sol.history.len().saturating_sub(1),
            "stationary_hashrate": stationary_hashrate(u, &s.params),
            "trajectory_terminal": path.k.last(),
            "trajectory_clamped": path.clamped,
            "characteristic_checks": checks,
            "max_characteristic_gap": worst,
        }),
        diagnostics: json!({ "max_residual": max_residual, "max_characteristic_gap": worst }),
        residuals: Some(sol.history),
    })
}
