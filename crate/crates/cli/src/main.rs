//! `hpe2d`: batch runs, ledger verification and manufactured-solution
//! studies.
//!
//! Exit status is 0 when every hard check passes, 1 when one fails and 2
//! on configuration, I/O or usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hpe2d_core::experiment::{load_config, run_experiment, verify_ledger, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "hpe2d", version, about = "2D viscous hydrostatic primitive equations: runs and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Worker threads for ensemble members; overrides `workers` in the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recompute ledger diagnostics from a CSV and compare with its summary.
    Verify { ledger: PathBuf },
    /// Run the manufactured-solution convergence study for a config's depth
    /// and Robin coefficients.
    Mms {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn execute(cfg: ExperimentConfig) -> Result<ExitCode, String> {
    let outcome = run_experiment(&cfg).map_err(|e| e.to_string())?;
    print!("{}", outcome.report.render());
    println!("artifacts in {}", cfg.output.display());
    Ok(if outcome.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main_inner(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { config, workers, output } => {
            let mut cfg = load_config(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            if let Some(w) = workers {
                if w == 0 {
                    return Err("--workers must be at least 1".into());
                }
                cfg.workers = Some(w);
            }
            if let Some(o) = output {
                cfg.output = o;
            }
            execute(cfg)
        }
        Command::Mms { config, output } => {
            let mut cfg = load_config(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            if cfg.scenario != Scenario::MmsConvergence {
                cfg.scenario = Scenario::MmsConvergence;
                cfg.ensemble = None;
                cfg.twin = None;
            }
            if let Some(o) = output {
                cfg.output = o;
            }
            execute(cfg)
        }
        Command::Verify { ledger } => {
            let v = verify_ledger(&ledger).map_err(|e| format!("{}: {e}", ledger.display()))?;
            for (k, x) in &v.recomputed {
                println!("{k} = {x:.16e}");
            }
            for m in &v.mismatches {
                println!("MISMATCH {m}");
            }
            println!("compared {} values, {} mismatches", v.compared, v.mismatches.len());
            Ok(if v.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
