use mfg_core::growth::{solve_aiyagari_mfg, AiyagariParams, ForwardInputs, InitialWealth};
use mfg_core::numerics::{FixedPointConfig, TimeGrid};
use serde::Deserialize;
use serde_json::json;

use super::{positive, ScenarioOutput, Table};
use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::CsvTable;

fn one() -> f64 {
    1.0
}

fn unit_wealth() -> InitialWealth {
    InitialWealth::Point { value: 1.0 }
}

fn default_max_iter() -> usize {
    200
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    alpha: f64,
    #[serde(rename = "A", default = "one")]
    a_tfp: f64,
    delta: f64,
    gamma: f64,
    #[serde(default = "one")]
    horizon: f64,
    #[serde(default = "one")]
    z0: f64,
    #[serde(default = "unit_wealth")]
    a0: InitialWealth,
    #[serde(default = "one")]
    z_vol: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
}

pub(super) struct Settings {
    params: AiyagariParams,
    inputs: ForwardInputs,
    grid: TimeGrid,
    fixed_point: FixedPointConfig,
    paths: usize,
}

pub(super) fn settings(cfg: &ScenarioConfig) -> Result<Settings, CliError> {
    let p: Params = cfg.params()?;
    let params = AiyagariParams {
        alpha_cd: p.alpha,
        a_tfp: p.a_tfp,
        delta: p.delta,
        gamma_crra: p.gamma,
        horizon: p.horizon,
    };
    params.validate()?;
    Ok(Settings {
        params,
        inputs: ForwardInputs {
            z0: p.z0,
            a0: p.a0,
            z_vol: p.z_vol,
        },
        grid: TimeGrid::new(0.0, p.horizon, cfg.steps_or(200)?)?,
        fixed_point: FixedPointConfig::new(
            cfg.damping_or(0.5)?,
            cfg.tol_or(1e-7)?,
            positive("params.max_iter", p.max_iter)?,
        )?,
        paths: positive("paths", cfg.paths_or(20_000))?,
    })
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let s = settings(cfg)?;
    let sol = solve_aiyagari_mfg(
        &s.params,
        &s.inputs,
        &s.grid,
        &s.fixed_point,
        s.paths,
        cfg.seed,
    )?;
    let flow = CsvTable::from_columns(vec![
        ("t".into(), s.grid.times()),
        ("mu_bar".into(), sol.flow.mu_bar.clone()),
        ("std_err".into(), sol.std_err.clone()),
        ("Y".into(), sol.adjoint.y.clone()),
        (
            "consumption".into(),
            sol.adjoint.consumption(s.params.gamma_crra),
        ),
    ]);
    let mut residuals = CsvTable::new(["iteration", "residual"]);
    for (i, r) in sol.residuals.iter().enumerate() {
        residuals.push(vec![(i + 1) as f64, *r]);
    }
    let last = sol.residuals.last().copied().unwrap_or(0.0);
    Ok(ScenarioOutput {
        tables: vec![
            Table::new("flow.csv", flow.render()),
            Table::new("residuals.csv", residuals.render()),
        ],
        summary: json!({
            "iterations": sol.residuals.len(),
            "final_residual": last,
            "mu_bar_terminal": sol.flow.mu_bar.last(),
            "adjoint_bounds": [sol.adjoint.bounds.0, sol.adjoint.bounds.1],
            "floored": sol.floored,
        }),
        diagnostics: json!({ "final_residual": last, "floored": sol.floored }),
        residuals: Some(sol.residuals),
    })
}
