use std::sync::Arc;

use mfg_core::contract_mfg::{
    build_epidemic_model, compare_plain_nash, optimize_contract, ContractSearch, EpidemicParams,
    FiniteStateModel, MfgEquilibrium, NashConfig, PaymentUtility, PrincipalSpec,
};
use serde::Deserialize;
use serde_json::{json, Value};

use super::{positive, ScenarioOutput, Table};
use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::CsvTable;

const EPIDEMIC_LABELS: [&str; 4] = ["AI", "AH", "BI", "BH"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    #[default]
    Epidemic,
    CustomMatrix,
}

/// A model with constant rates and costs, given as dense matrices.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomMatrix {
    base_rates: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    alpha_lo: f64,
    alpha_hi: f64,
    c1: Vec<f64>,
    gamma: Vec<f64>,
    horizon: f64,
    p0: Vec<f64>,
    kappa: f64,
    /// Regulator flow cost `Σ w_i p_i`.
    #[serde(default)]
    flow_weights: Option<Vec<f64>>,
    /// Regulator terminal cost `Σ v_i p_i(T)`.
    #[serde(default)]
    terminal_weights: Option<Vec<f64>>,
    #[serde(default)]
    utility: PaymentUtility,
    #[serde(default)]
    rate_bounds: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchParams {
    r_knots: Option<usize>,
    r_max: Option<f64>,
    xi_lo: Option<f64>,
    xi_hi: Option<f64>,
    max_evals: Option<usize>,
    restarts: Option<usize>,
    penalty: Option<f64>,
    penalty_rounds: Option<usize>,
    violation_tol: Option<f64>,
    max_iter: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    #[serde(default)]
    model: ModelKind,
    /// Overrides of the default epidemic parameters, key by key.
    #[serde(default)]
    epidemic: Option<Value>,
    #[serde(default)]
    custom: Option<CustomMatrix>,
    #[serde(default)]
    search: SearchParams,
}

pub(super) struct Settings {
    model: FiniteStateModel,
    principal: PrincipalSpec,
    labels: Vec<String>,
    search: ContractSearch,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

/// Defaults with the given keys replaced; unknown keys are rejected.
fn epidemic_params(overrides: Option<Value>) -> Result<EpidemicParams, CliError> {
    let mut merged =
        serde_json::to_value(EpidemicParams::default()).expect("defaults are plain data");
    match overrides {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            let base = merged
                .as_object_mut()
                .expect("struct serialises to an object");
            for (k, v) in map {
                if !base.contains_key(&k) {
                    return Err(schema(format!("params.epidemic: unknown field `{k}`")));
                }
                base.insert(k, v);
            }
        }
        Some(_) => return Err(schema("params.epidemic: expected an object")),
    }
    serde_json::from_value(merged).map_err(|e| schema(format!("params.epidemic: {e}")))
}

fn square(name: &str, rows: &[Vec<f64>], m: usize) -> Result<Vec<f64>, CliError> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(schema(format!(
            "params.custom.{name}: expected a {m}×{m} matrix"
        )));
    }
    Ok(rows.concat())
}

fn weights(name: &str, w: Option<Vec<f64>>, m: usize) -> Result<Vec<f64>, CliError> {
    let w = w.unwrap_or_else(|| vec![0.0; m]);
    if w.len() != m {
        return Err(schema(format!(
            "params.custom.{name}: expected {m} entries"
        )));
    }
    Ok(w)
}

fn custom_model(c: CustomMatrix) -> Result<(FiniteStateModel, PrincipalSpec), CliError> {
    let m = c.p0.len();
    if m < 2 {
        return Err(schema("params.custom.p0: need at least two states"));
    }
    for (name, v) in [("c1", &c.c1), ("gamma", &c.gamma)] {
        if v.len() != m {
            return Err(schema(format!(
                "params.custom.{name}: expected {m} entries"
            )));
        }
    }
    let base = square("base_rates", &c.base_rates, m)?;
    let lambda = square("lambda", &c.lambda, m)?;
    let flow = weights("flow_weights", c.flow_weights, m)?;
    let terminal = weights("terminal_weights", c.terminal_weights, m)?;
    let mut model = FiniteStateModel::constant(
        base,
        lambda,
        (c.alpha_lo, c.alpha_hi),
        c.c1,
        c.gamma,
        c.horizon,
        c.p0,
    )?;
    model.utility = c.utility;
    model.rate_bounds = c.rate_bounds.map(|[lo, hi]| (lo, hi));
    model.validate()?;
    let principal = PrincipalSpec {
        c0: Arc::new(move |_, p| flow.iter().zip(p).map(|(w, x)| w * x).sum()),
        terminal: Arc::new(move |p| terminal.iter().zip(p).map(|(w, x)| w * x).sum()),
        kappa: c.kappa,
    };
    Ok((model, principal))
}

pub(super) fn settings(cfg: &ScenarioConfig) -> Result<Settings, CliError> {
    let p: Params = cfg.params()?;
    let (model, principal, labels) = match p.model {
        ModelKind::Epidemic => {
            if p.custom.is_some() {
                return Err(schema(
                    "params.custom: only used with model `custom-matrix`",
                ));
            }
            let (model, principal) = build_epidemic_model(&epidemic_params(p.epidemic)?)?;
            (model, principal, EPIDEMIC_LABELS.map(String::from).to_vec())
        }
        ModelKind::CustomMatrix => {
            if p.epidemic.is_some() {
                return Err(schema("params.epidemic: only used with model `epidemic`"));
            }
            let c = p
                .custom
                .ok_or_else(|| schema("params.custom: required for model `custom-matrix`"))?;
            let (model, principal) = custom_model(c)?;
            let labels = (0..model.m).map(|i| format!("s{i}")).collect();
            (model, principal, labels)
        }
    };
    let d = ContractSearch::default();
    let s = p.search;
    let nash = NashConfig {
        steps: cfg.steps_or(d.nash.steps)?,
        damping: cfg.damping_or(d.nash.damping)?,
        tol: cfg.tol_or(d.nash.tol)?,
        max_iter: positive(
            "params.search.max_iter",
            s.max_iter.unwrap_or(d.nash.max_iter),
        )?,
    };
    let search = ContractSearch {
        r_knots: positive("params.search.r_knots", s.r_knots.unwrap_or(d.r_knots))?,
        r_max: s.r_max.unwrap_or(d.r_max),
        xi_lo: s.xi_lo.unwrap_or(d.xi_lo),
        xi_hi: s.xi_hi.unwrap_or(d.xi_hi),
        nash,
        max_evals: positive(
            "params.search.max_evals",
            s.max_evals.unwrap_or(d.max_evals),
        )?,
        restarts: s.restarts.unwrap_or(d.restarts),
        penalty: s.penalty.unwrap_or(d.penalty),
        penalty_rounds: positive(
            "params.search.penalty_rounds",
            s.penalty_rounds.unwrap_or(d.penalty_rounds),
        )?,
        violation_tol: s.violation_tol.unwrap_or(d.violation_tol),
    };
    if !(search.r_max >= 0.0) || !(search.xi_lo <= search.xi_hi) {
        return Err(schema("params.search: need r_max ≥ 0 and xi_lo ≤ xi_hi"));
    }
    if !(search.penalty > 0.0) || !(search.violation_tol > 0.0) {
        return Err(schema(
            "params.search: penalty and violation_tol must be positive",
        ));
    }
    Ok(Settings {
        model,
        principal,
        labels,
        search,
    })
}

/// `t, p_*, u_*, alpha_*` on every node of the equilibrium grid.
fn regime_table(eq: &MfgEquilibrium, labels: &[String]) -> CsvTable {
    let mut header = vec!["t".to_string()];
    for prefix in ["p", "u", "alpha"] {
        header.extend(labels.iter().map(|l| format!("{prefix}_{l}")));
    }
    let mut table = CsvTable::new(header);
    for k in 0..eq.grid.node_count() {
        let mut row = vec![eq.grid.time(k)];
        row.extend_from_slice(eq.p_at(k));
        row.extend_from_slice(eq.u_at(k));
        row.extend_from_slice(eq.alpha_at(k));
        table.push(row);
    }
    table
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let s = settings(cfg)?;
    let opt = optimize_contract(&s.model, &s.principal, &s.search)?;
    let cmp = compare_plain_nash(
        &s.model,
        &s.principal,
        &opt.contract,
        &opt.equilibrium,
        &s.search.nash,
    )?;
    let kappa = s.principal.kappa;
    let with = &cmp.with_contract;
    let plain = &cmp.plain;
    let feasible = with.agent_cost <= kappa + s.search.violation_tol;
    let summary = json!({
        "states": s.labels,
        "kappa": kappa,
        "J": with.agent_cost,
        "J0": with.principal_cost,
        "V": opt.value,
        "feasible": feasible,
        "contract": { "r_knots": opt.contract.r_knots, "xi": opt.contract.xi },
        "comparison": {
            "contract": { "agent_cost": with.agent_cost, "principal_cost": with.principal_cost },
            "plain_nash": { "agent_cost": plain.agent_cost, "principal_cost": plain.principal_cost },
            "principal_saving": cmp.principal_saving(),
        },
        "search": {
            "evaluations": opt.evaluations,
            "penalty_weight": opt.penalty_weight,
        },
    });
    let diagnostics = json!({
        "nash_residual": with.equilibrium.residual,
        "simplex_error": with.equilibrium.simplex_error(),
        "projection": with.equilibrium.projection,
        "rate_violations": with.equilibrium.rate_violations,
        "plain_nash_residual": plain.equilibrium.residual,
    });
    Ok(ScenarioOutput {
        tables: vec![
            Table::new(
                "contract.csv",
                regime_table(&with.equilibrium, &s.labels).render(),
            ),
            Table::new(
                "plain.csv",
                regime_table(&plain.equilibrium, &s.labels).render(),
            ),
        ],
        summary,
        diagnostics,
        residuals: Some(with.equilibrium.residuals.clone()),
    })
}
