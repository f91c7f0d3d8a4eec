use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfg_cli::{run_scenario, validate_config, CliError, Overrides, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "mfg",
    version,
    about = "Solve and simulate mean field game scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Check a config without solving.
    Validate { config: PathBuf },
    /// Print the known scenario names.
    ListScenarios,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            paths,
            steps,
            tol,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.apply(&Overrides {
                seed,
                out_dir,
                paths,
                steps,
                tol,
            });
            let manifest = run_scenario(&cfg)?;
            for a in &manifest.artifacts {
                println!("{}  {}", a.sha256, cfg.out_dir.join(&a.file).display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let scenario = validate_config(&cfg)?;
            println!("ok: {}", scenario.name());
            Ok(())
        }
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<18} {}", s.name(), s.describe());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
