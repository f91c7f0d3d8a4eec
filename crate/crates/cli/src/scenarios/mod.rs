//! One module per scenario. Each turns its parameter table into model
//! inputs, runs the solvers and lays the results out as tables.

mod aiyagari;
mod contract;
mod growth;
mod macro_fin;
mod mining;
mod systemic;

use serde_json::Value;

use crate::config::{Scenario, ScenarioConfig};
use crate::error::CliError;

pub struct Table {
    pub file: String,
    pub contents: String,
}

impl Table {
    pub fn new(file: &str, contents: String) -> Self {
        Self {
            file: file.to_string(),
            contents,
        }
    }
}

/// Everything a scenario hands back for writing.
pub struct ScenarioOutput {
    pub tables: Vec<Table>,
    pub summary: Value,
    pub diagnostics: Value,
    pub residuals: Option<Vec<f64>>,
}

pub fn validate(scenario: Scenario, cfg: &ScenarioConfig) -> Result<(), CliError> {
    match scenario {
        Scenario::SystemicRisk => systemic::settings(cfg).map(|_| ()),
        Scenario::GrowthPareto => growth::settings(cfg).map(|_| ()),
        Scenario::Aiyagari => aiyagari::settings(cfg).map(|_| ()),
        Scenario::MacroOnePop => macro_fin::one_pop_settings(cfg).map(|_| ()),
        Scenario::MacroTwoPop => macro_fin::two_pop_settings(cfg).map(|_| ()),
        Scenario::EpidemicContract => contract::settings(cfg).map(|_| ()),
        Scenario::Mining => mining::settings(cfg).map(|_| ()),
    }
}

pub fn run(scenario: Scenario, cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    match scenario {
        Scenario::SystemicRisk => systemic::run(cfg),
        Scenario::GrowthPareto => growth::run(cfg),
        Scenario::Aiyagari => aiyagari::run(cfg),
        Scenario::MacroOnePop => macro_fin::run_one_pop(cfg),
        Scenario::MacroTwoPop => macro_fin::run_two_pop(cfg),
        Scenario::EpidemicContract => contract::run(cfg),
        Scenario::Mining => mining::run(cfg),
    }
}

/// Rejects a non-positive count with a field-level message.
pub(crate) fn positive(name: &str, n: usize) -> Result<usize, CliError> {
    if n == 0 {
        Err(CliError::Schema(format!("{name}: must be positive")))
    } else {
        Ok(n)
    }
}
