//! Scenario configuration files and command-line overrides.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SystemicRisk,
    GrowthPareto,
    Aiyagari,
    MacroOnePop,
    MacroTwoPop,
    EpidemicContract,
    Mining,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::SystemicRisk,
        Scenario::GrowthPareto,
        Scenario::Aiyagari,
        Scenario::MacroOnePop,
        Scenario::MacroTwoPop,
        Scenario::EpidemicContract,
        Scenario::Mining,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SystemicRisk => "systemic-risk",
            Scenario::GrowthPareto => "growth-pareto",
            Scenario::Aiyagari => "aiyagari",
            Scenario::MacroOnePop => "macro-one-pop",
            Scenario::MacroTwoPop => "macro-two-pop",
            Scenario::EpidemicContract => "epidemic-contract",
            Scenario::Mining => "mining",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Scenario::SystemicRisk => {
                "interbank LQ game: Riccati paths and Monte Carlo equilibrium"
            }
            Scenario::GrowthPareto => {
                "Pareto wealth law under common noise, particles vs closed form"
            }
            Scenario::Aiyagari => "Aiyagari diffusion game: mean-wealth fixed point and adjoint",
            Scenario::MacroOnePop => "one-population stationary equilibrium in closed form",
            Scenario::MacroTwoPop => "two-population wealth share paths and drift statistics",
            Scenario::EpidemicContract => {
                "regulator contract for a two-city epidemic vs plain Nash"
            }
            Scenario::Mining => "stationary value of hash rate and aggregate trajectory",
        }
    }

    pub fn parse(name: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|s| s.name()).collect();
                CliError::Schema(format!(
                    "scenario: unknown `{name}`, expected one of {}",
                    known.join(", ")
                ))
            })
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Contents of a config file; numeric controls left out fall back to
/// scenario defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub tol: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Schema(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if o.paths.is_some() {
            self.paths = o.paths;
        }
        if o.steps.is_some() {
            self.steps = o.steps;
        }
        if o.tol.is_some() {
            self.tol = o.tol;
        }
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        Scenario::parse(&self.scenario)
    }

    /// Scenario parameters as a typed table; a missing table reads as `{}`.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        let value = if self.params.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            self.params.clone()
        };
        serde_json::from_value(value).map_err(|e| CliError::Schema(format!("params: {e}")))
    }

    pub fn steps_or(&self, default: usize) -> Result<usize, CliError> {
        match self.steps {
            Some(0) => Err(CliError::Schema("steps: must be positive".into())),
            Some(s) => Ok(s),
            None => Ok(default),
        }
    }

    pub fn paths_or(&self, default: usize) -> usize {
        self.paths.unwrap_or(default)
    }

    pub fn tol_or(&self, default: f64) -> Result<f64, CliError> {
        match self.tol {
            Some(t) if !(t > 0.0) => Err(CliError::Schema("tol: must be positive".into())),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    }

    pub fn damping_or(&self, default: f64) -> Result<f64, CliError> {
        match self.damping {
            Some(d) if !(d > 0.0 && d <= 1.0) => {
                Err(CliError::Schema("damping: must lie in (0, 1]".into()))
            }
            Some(d) => Ok(d),
            None => Ok(default),
        }
    }
}
