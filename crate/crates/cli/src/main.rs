use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmc_cli::formats::convergence_table;
use mmc_cli::{presets, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mmc", version, about = "Ternary MMC Cahn-Hilliard solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment to its final time.
    Run {
        config: PathBuf,
        /// Override a config entry, e.g. `--set grid.n=32`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Stop after this step, leaving the run resumable.
        #[arg(long, value_name = "STEP")]
        stop_after: Option<u64>,
    },
    /// Run the time-step convergence study and print the error table.
    Converge {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Continue a run from its checkpoint.
    Resume {
        checkpoint: PathBuf,
        #[arg(long, value_name = "STEP")]
        stop_after: Option<u64>,
    },
    /// Parse a config and check its invariants without solving.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print a built-in config, or list them when no name is given.
    Preset { name: Option<String> },
}

fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    cfg.apply_env();
    for o in overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, overrides, stop_after } => {
            let cfg = load(&config, &overrides)?;
            let s = mmc_cli::run_until(&cfg, stop_after)?;
            let what = if s.completed { "finished" } else { "stopped" };
            println!("{what} at step {} in {}", s.step, s.dir.display());
        }
        Command::Converge { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let rows = mmc_cli::run_convergence(&cfg)?;
            print!("{}", convergence_table(&rows));
        }
        Command::Resume { checkpoint, stop_after } => {
            let s = mmc_cli::resume(&checkpoint, stop_after)?;
            let what = if s.completed { "finished" } else { "stopped" };
            println!("{what} at step {} in {}", s.step, s.dir.display());
        }
        Command::Validate { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            println!("{}: ok ({} steps)", config.display(), cfg.total_steps()?);
        }
        Command::Preset { name: None } => {
            for n in presets::names() {
                println!("{n}");
            }
        }
        Command::Preset { name: Some(name) } => {
            let cfg = presets::preset(&name).ok_or_else(|| CliError::Config(format!("unknown preset {name}")))?;
            print!("{}", cfg.serialize());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
