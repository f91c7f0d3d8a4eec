use mfg_core::lq_systemic::{
    empirical_mean_path, estimate_cost, simulate_equilibrium, solve_riccati, LoopKind, LqParams,
    Players,
};
use mfg_core::numerics::{mean_and_stderr, TimeGrid};
use serde::Deserialize;
use serde_json::json;

use super::{positive, ScenarioOutput, Table};
use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::CsvTable;

fn default_rho() -> f64 {
    0.0
}

fn default_horizon() -> f64 {
    1.0
}

fn default_loop() -> LoopKind {
    LoopKind::Closed
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    a: f64,
    q: f64,
    eps: f64,
    c: f64,
    sigma: f64,
    #[serde(default = "default_rho")]
    rho: f64,
    /// `null` selects the mean-field limit; no banks are simulated then.
    n_players: Option<usize>,
    #[serde(default = "default_horizon")]
    horizon: f64,
    #[serde(default)]
    steps: Option<usize>,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    x0: Option<Vec<f64>>,
    /// Which equilibrium drives the simulation.
    #[serde(default = "default_loop")]
    simulate: LoopKind,
}

pub(super) struct Settings {
    lq: LqParams,
    grid: TimeGrid,
    samples: usize,
    x0: Vec<f64>,
    simulate: LoopKind,
}

pub(super) fn settings(cfg: &ScenarioConfig) -> Result<Settings, CliError> {
    let p: Params = cfg.params()?;
    let lq = LqParams {
        a: p.a,
        q: p.q,
        eps: p.eps,
        c: p.c,
        sigma: p.sigma,
        rho_corr: p.rho,
        n_players: p.n_players.map_or(Players::Infinite, Players::Finite),
        horizon: p.horizon,
    };
    lq.validate()?;
    let steps = positive("steps", cfg.steps.or(p.steps).unwrap_or(200))?;
    let samples = positive("samples", cfg.paths.or(p.samples).unwrap_or(1000))?;
    let x0 = match (p.x0, p.n_players) {
        (Some(x0), Some(n)) if x0.len() != n => {
            return Err(CliError::Schema(format!(
                "params.x0: {} entries for {n} players",
                x0.len()
            )))
        }
        (Some(_), None) => {
            return Err(CliError::Schema(
                "params.x0: needs a finite n_players".into(),
            ))
        }
        (Some(x0), Some(_)) => x0,
        (None, n) => vec![0.0; n.unwrap_or(0)],
    };
    if p.simulate == LoopKind::Limit && p.n_players.is_some() {
        return Err(CliError::Schema(
            "params.simulate: finite games simulate `open` or `closed`".into(),
        ));
    }
    Ok(Settings {
        lq,
        grid: TimeGrid::new(0.0, p.horizon, steps)?,
        samples,
        x0,
        simulate: p.simulate,
    })
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let s = settings(cfg)?;
    let limit_params = LqParams {
        n_players: Players::Infinite,
        ..s.lq
    };
    let open = solve_riccati(&s.lq, &s.grid, LoopKind::Open)?;
    let closed = solve_riccati(&s.lq, &s.grid, LoopKind::Closed)?;
    let limit = solve_riccati(&limit_params, &s.grid, LoopKind::Limit)?;
    let times = s.grid.times();
    let riccati = CsvTable::from_columns(vec![
        ("t".into(), times.clone()),
        ("eta_open".into(), open.eta.clone()),
        ("eta_closed".into(), closed.eta.clone()),
        ("eta_limit".into(), limit.eta.clone()),
    ]);
    let sup_gap = open
        .eta
        .iter()
        .zip(&closed.eta)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let mut tables = vec![Table::new("riccati.csv", riccati.render())];
    let mut summary = json!({
        "n_players": match s.lq.n_players {
            Players::Finite(n) => json!(n),
            Players::Infinite => serde_json::Value::Null,
        },
        "eta0": { "open": open.eta[0], "closed": closed.eta[0], "limit": limit.eta[0] },
        "sup_open_closed_gap": sup_gap,
    });

    if let Players::Finite(n) = s.lq.n_players {
        let driver = if s.simulate == LoopKind::Open {
            &open
        } else {
            &closed
        };
        let ens = simulate_equilibrium(&s.lq, driver, &s.x0, s.samples, cfg.seed)?;
        let nodes = s.grid.node_count();
        let mut mean_paths = Vec::with_capacity(s.samples);
        let mut spread = vec![0.0; nodes];
        for sample in 0..s.samples {
            let path = ens.path(sample);
            let means = empirical_mean_path(&ens, sample);
            for k in 0..nodes {
                let state = &path[k * n..(k + 1) * n];
                let var = state.iter().map(|x| (x - means[k]).powi(2)).sum::<f64>() / n as f64;
                spread[k] += var.sqrt() / s.samples as f64;
            }
            mean_paths.push(means);
        }
        let mut table = CsvTable::new(["t", "mean", "mean_std_err", "cross_std"]);
        for k in 0..nodes {
            let col: Vec<f64> = mean_paths.iter().map(|m| m[k]).collect();
            let (m, se) = mean_and_stderr(&col);
            table.push(vec![times[k], m, se, spread[k]]);
        }
        tables.push(Table::new("mean_path.csv", table.render()));
        let increments: Vec<f64> = mean_paths.iter().map(|m| m[nodes - 1] - m[0]).collect();
        let (inc, inc_se) = mean_and_stderr(&increments);
        let cost = estimate_cost(&s.lq, &ens, driver)?;
        let avg_cost = cost.mean.iter().sum::<f64>() / n as f64;
        summary["simulation"] = json!({
            "loop": s.simulate,
            "samples": s.samples,
            "mean_increment": inc,
            "mean_increment_std_err": inc_se,
            "player_cost_mean": avg_cost,
            "player0_cost": cost.mean[0],
            "player0_cost_std_err": cost.std_err[0],
            "flagged_paths": ens.flagged_count(),
        });
    }
    Ok(ScenarioOutput {
        tables,
        diagnostics: json!({ "sup_open_closed_gap": sup_gap }),
        summary,
        residuals: None,
    })
}
