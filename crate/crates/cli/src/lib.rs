//! Scenario runner: reads a JSON config, solves one model end to end and
//! writes CSV tables, a JSON summary and a run manifest into `out_dir`.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with the range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod scenarios;

use std::path::Path;
use std::time::Instant;

pub use config::{Overrides, Scenario, ScenarioConfig};
pub use error::CliError;
pub use manifest::{Artifact, RunManifest, RunStatus};

/// File name of the manifest inside `out_dir`.
pub const MANIFEST_FILE: &str = "manifest.json";
/// File name of the scenario summary inside `out_dir`.
pub const SUMMARY_FILE: &str = "summary.json";

/// Checks the config and the scenario parameters without solving anything.
pub fn validate_config(config: &ScenarioConfig) -> Result<Scenario, CliError> {
    let scenario = config.scenario()?;
    scenarios::validate(scenario, config)?;
    Ok(scenario)
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<Artifact, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
    Ok(Artifact::describe(name, contents))
}

/// Runs one scenario and writes its artifacts.
///
/// The manifest is written on success and on solver failure; rejected input
/// and I/O errors return before anything is recorded.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let scenario = validate_config(config)?;
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;

    let solve_started = Instant::now();
    let result = scenarios::run(scenario, config);
    let solve_seconds = solve_started.elapsed().as_secs_f64();

    let mut manifest = RunManifest::new(config.clone());
    manifest.timings.solve_seconds = solve_seconds;
    match result {
        Ok(out) => {
            for table in &out.tables {
                manifest
                    .artifacts
                    .push(write_file(dir, &table.file, table.contents.as_bytes())?);
            }
            let summary = serde_json::to_vec_pretty(&out.summary).expect("summary is plain JSON");
            manifest
                .artifacts
                .push(write_file(dir, SUMMARY_FILE, &summary)?);
            manifest.diagnostics = out.diagnostics;
            manifest.residual_history = out.residuals;
            manifest.timings.total_seconds = started.elapsed().as_secs_f64();
            write_manifest(dir, &manifest)?;
            Ok(manifest)
        }
        Err(err) => {
            if err.exit_code() == 3 {
                manifest.status = RunStatus::Failed;
                manifest.exit_code = 3;
                manifest.error = Some(err.to_string());
                manifest.residual_history = err.residual_history().map(<[f64]>::to_vec);
                manifest.timings.total_seconds = started.elapsed().as_secs_f64();
                write_manifest(dir, &manifest)?;
            }
            Err(err)
        }
    }
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_vec_pretty(manifest).expect("manifest is plain JSON");
    write_file(dir, MANIFEST_FILE, &text).map(|_| ())
}
