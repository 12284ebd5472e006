use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weakval_cli::scenario::{self, Kind, SEED_ENV};
use weakval_cli::{golden_table, run_scenario, verify_scenario, CliError, CliResult};

/// Runs weak-measurement scenarios and writes their data as CSV.
#[derive(Parser)]
#[command(name = "weakval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV outputs and manifest.
    Run {
        config: PathBuf,
        /// Write here instead of the scenario's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the golden checks attached to a scenario; exit 4 if any fails.
    Verify { config: PathBuf },
    /// List the experiment kinds.
    List,
}

fn seed_override() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, out } => {
            let s = scenario::load(&config, seed_override().as_deref())?;
            for path in run_scenario(&s, out.as_deref())? {
                println!("{}", path.display());
            }
        }
        Command::Verify { config } => {
            let s = scenario::load(&config, seed_override().as_deref())?;
            let checks = verify_scenario(&s)?;
            print!("{}", golden_table(&checks));
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Golden(failed));
            }
        }
        Command::List => {
            for k in Kind::ALL {
                println!("{:<14} {}", k.name(), k.describe());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("weakval: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
