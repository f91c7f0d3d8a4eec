//! Run manifest: what ran, what it wrote and how it went.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to `out_dir`.
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

impl Artifact {
    pub fn describe(file: &str, contents: &[u8]) -> Self {
        Self {
            file: file.to_string(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ScenarioConfig,
    pub status: RunStatus,
    pub exit_code: i32,
    pub artifacts: Vec<Artifact>,
    pub timings: Timings,
    pub diagnostics: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_history: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config: ScenarioConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            status: RunStatus::Ok,
            exit_code: 0,
            artifacts: Vec::new(),
            timings: Timings::default(),
            diagnostics: serde_json::Value::Null,
            residual_history: None,
            error: None,
        }
    }
}
