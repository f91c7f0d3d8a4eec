use mfg_core::macro_finance::{
    one_pop_stationary_equilibrium, simulate_eta_with, two_pop_constants, EtaSchemeConfig,
    OnePopParams, TwoPopParams,
};
use mfg_core::numerics::TimeGrid;
use serde::Deserialize;
use serde_json::json;

use super::{positive, ScenarioOutput, Table};
use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::{named_values, CsvTable};

/// Largest number of recorded time nodes in the η table.
const MAX_RECORDED_NODES: usize = 1000;
/// Smallest bin population reported in the drift table.
const MIN_BIN_COUNT: u64 = 1000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OnePop {
    a: f64,
    rho: f64,
    kappa: f64,
    delta: f64,
    sigma: f64,
    sigma0: f64,
    #[serde(rename = "muM")]
    mu_m: f64,
    #[serde(rename = "sigmaM")]
    sigma_m: f64,
}

pub(super) fn one_pop_settings(cfg: &ScenarioConfig) -> Result<OnePopParams, CliError> {
    let p: OnePop = cfg.params()?;
    let params = OnePopParams {
        a: p.a,
        rho: p.rho,
        kappa: p.kappa,
        delta: p.delta,
        sigma: p.sigma,
        sigma0: p.sigma0,
        mu_m: p.mu_m,
        sigma_m: p.sigma_m,
    };
    params.validate()?;
    Ok(params)
}

pub(super) fn run_one_pop(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let params = one_pop_settings(cfg)?;
    let eq = one_pop_stationary_equilibrium(&params)?;
    let table = named_values(&[
        ("vartheta", eq.vartheta),
        ("one_minus_vartheta", eq.one_minus_vartheta),
        ("p", eq.p),
        ("q", eq.q),
        ("p_plus_q", eq.p_plus_q),
        ("iota", eq.iota),
        ("r", eq.r),
        ("theta", eq.theta),
        ("p_printed", eq.p_printed),
    ]);
    Ok(ScenarioOutput {
        tables: vec![Table::new("equilibrium.csv", table)],
        summary: serde_json::to_value(eq).expect("equilibrium is plain data"),
        diagnostics: json!({ "p_minus_printed": eq.p - eq.p_printed }),
        residuals: None,
    })
}

fn default_eta0() -> f64 {
    0.1
}

fn default_horizon() -> f64 {
    50.0
}

fn default_bins() -> usize {
    20
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoPop {
    a: f64,
    rho: f64,
    kappa: f64,
    delta: f64,
    sigma: f64,
    #[serde(default = "default_eta0")]
    eta0: f64,
    #[serde(default = "default_horizon")]
    horizon: f64,
    #[serde(default = "default_bins")]
    drift_bins: usize,
}

pub(super) struct TwoPopSettings {
    params: TwoPopParams,
    eta0: f64,
    grid: TimeGrid,
    paths: usize,
    scheme: EtaSchemeConfig,
}

/// Smallest stride dividing `steps` that keeps at most [`MAX_RECORDED_NODES`] intervals.
fn record_stride(steps: usize) -> usize {
    (steps.div_ceil(MAX_RECORDED_NODES)..=steps)
        .find(|d| steps.is_multiple_of(*d))
        .unwrap_or(steps)
}

pub(super) fn two_pop_settings(cfg: &ScenarioConfig) -> Result<TwoPopSettings, CliError> {
    let p: TwoPop = cfg.params()?;
    let params = TwoPopParams {
        a: p.a,
        rho: p.rho,
        kappa: p.kappa,
        delta: p.delta,
        sigma: p.sigma,
    };
    params.validate()?;
    if !(p.eta0 > 0.0 && p.eta0 < 1.0) {
        return Err(CliError::Schema(format!(
            "params.eta0: {} must lie in (0, 1)",
            p.eta0
        )));
    }
    // default step 1e-3
    let steps = cfg.steps_or((p.horizon * 1000.0).round().max(1.0) as usize)?;
    Ok(TwoPopSettings {
        params,
        eta0: p.eta0,
        grid: TimeGrid::new(0.0, p.horizon, steps)?,
        paths: positive("paths", cfg.paths_or(1000))?,
        scheme: EtaSchemeConfig {
            record_every: record_stride(steps),
            drift_bins: p.drift_bins,
            ..Default::default()
        },
    })
}

fn quantile(sorted: &[f64], u: f64) -> f64 {
    let pos = u * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(super) fn run_two_pop(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let s = two_pop_settings(cfg)?;
    let p = &s.params;
    let (q, iota) = two_pop_constants(p)?;
    // r = r̄ − σ²/η with r̄ collecting the η-free terms
    let r_bar = p.rho + ((1.0 + p.kappa * p.a) / (1.0 + p.kappa * p.rho)).ln() / p.kappa - p.delta;
    let sim = simulate_eta_with(p, s.eta0, &s.grid, s.paths, cfg.seed, &s.scheme)?;
    let recorded = sim.eta.grid;
    let mut table = CsvTable::new(["t", "mean_eta", "q05_eta", "q50_eta", "q95_eta", "mean_r"]);
    for k in 0..recorded.node_count() {
        let mut etas = sim.eta.cross_section(k, 0);
        let mean = etas.iter().sum::<f64>() / etas.len() as f64;
        let mean_r = etas
            .iter()
            .map(|e| r_bar - p.sigma * p.sigma / e)
            .sum::<f64>()
            / etas.len() as f64;
        etas.sort_by(f64::total_cmp);
        table.push(vec![
            recorded.time(k),
            mean,
            quantile(&etas, 0.05),
            quantile(&etas, 0.5),
            quantile(&etas, 0.95),
            mean_r,
        ]);
    }
    let mut tables = vec![Table::new("eta.csv", table.render())];
    let mut drift_summary = serde_json::Value::Null;
    if let Some(bins) = &sim.drift {
        let rel = bins.relative_errors(MIN_BIN_COUNT);
        let mut drift = CsvTable::new([
            "eta_centre",
            "relative_error",
            "raw_relative_error",
            "std_err",
        ]);
        for (c, corrected, raw, se) in &rel {
            drift.push(vec![*c, *corrected, *raw, *se]);
        }
        tables.push(Table::new("drift.csv", drift.render()));
        let worst = rel.iter().fold(0.0f64, |m, r| m.max(r.1.abs()));
        drift_summary = json!({ "bins_reported": rel.len(), "max_relative_error": worst });
    }
    let reached = sim
        .summaries
        .iter()
        .filter(|x| x.terminal_one_minus_eta <= 0.05)
        .count();
    let interior = sim
        .summaries
        .iter()
        .all(|x| x.min_eta > 0.0 && x.min_one_minus_eta > 0.0);
    let clearing = (p.rho * q - (p.a - iota)).abs();
    Ok(ScenarioOutput {
        tables,
        summary: json!({
            "q": q,
            "iota": iota,
            "goods_clearing_gap": clearing,
            "paths": s.paths,
            "fraction_reaching_0_95": reached as f64 / s.paths as f64,
            "all_interior": interior,
            "record_every": s.scheme.record_every,
            "drift": drift_summary,
        }),
        diagnostics: json!({ "all_interior": interior }),
        residuals: None,
    })
}
