use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use stmh_cli::commands;
use stmh_cli::{resolve_config, CliError};

/// Multi-head neural quantum states for the J1-J2 Heisenberg ring.
#[derive(Parser, Debug)]
#[command(name = "stmh", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Shipped configuration: n4, n4b, n4c, n6 or n8.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact diagonalisation of the configured chain.
    Ed,
    /// Train one ensemble per seed.
    Train,
    /// Ground-space diagnostics of a checkpoint.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Timing and accuracy sweep over head count or width.
    Bench,
    /// Modulus/phase rank analysis of a target family.
    Rank,
    /// Analytic cost model and slowdown sweep.
    Cost,
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable output"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli.config.as_deref(), cli.preset.as_deref(), cli.seed, cli.out)?;
    match cli.command {
        Command::Ed => print(&commands::cmd_ed(&cfg)?),
        Command::Train => {
            let summary = commands::cmd_train(&cfg)?;
            print(&summary);
            let aborted = summary.aborted();
            if !aborted.is_empty() {
                let list: Vec<String> = aborted.iter().map(|(s, m)| format!("seed {s}: {m}")).collect();
                return Err(CliError::Runtime(format!("training aborted ({})", list.join("; "))));
            }
        }
        Command::Diagnose { checkpoint } => print(&commands::cmd_diagnose(&cfg, &checkpoint)?),
        Command::Bench => print(&commands::cmd_bench(&cfg)?),
        Command::Rank => print(&commands::cmd_rank(&cfg)?),
        Command::Cost => print(&commands::cmd_cost(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
