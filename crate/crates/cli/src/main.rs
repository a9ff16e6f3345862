use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use ifl_core::analysis::FloorParams;
use ifl_core::harness::reports::{bound_report, hetero_report, statics_report, NetworkFile};
use ifl_core::harness::selfcheck::run_selfcheck;
use ifl_core::harness::{emit_results, from_versioned_str, run_simulation, run_sweep, Format, GridConfig, ScenarioConfig, Table};
use ifl_core::{Error, Result};

/// Card-authorization learning under impaired feedback.
#[derive(Parser)]
#[command(name = "ifl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for one seed, or every seed in the config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Regret floor, its maturity variant and the average observable fraction.
    Bound {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario across a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Ranked marginal sensitivities of the floor.
    Statics {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Issuer-level impairment indices and the heterogeneous floor.
    Hetero {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the fast invariant suite.
    Selfcheck,
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    from_versioned_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn print_report<T: serde::Serialize>(report: &T, text: String, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string(report)?);
    } else {
        print!("{text}");
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, seed, out, format } => {
            let config: ScenarioConfig = load(&config)?;
            config.scenario()?;
            let seeds = seed.map_or_else(|| config.seeds.clone(), |s| vec![s]);
            let runs = seeds
                .iter()
                .map(|&s| run_simulation(&config, s))
                .collect::<Result<Vec<_>>>()?;
            emit_results(Table::Runs(&runs), format, out.as_deref())
        }
        Command::Bound { params, json } => {
            let r = bound_report(&load::<FloorParams>(&params)?)?;
            print_report(&r, r.to_text(), json)
        }
        Command::Sweep { config, grid, out, format } => {
            let config: ScenarioConfig = load(&config)?;
            let grid: GridConfig = load(&grid)?;
            let table = run_sweep(&config, &grid)?;
            emit_results(Table::Sweep(&table), format, out.as_deref())
        }
        Command::Statics { params, json } => {
            let r = statics_report(&load::<FloorParams>(&params)?)?;
            print_report(&r, r.to_text(), json)
        }
        Command::Hetero { network, json } => {
            let r = hetero_report(&load::<NetworkFile>(&network)?)?;
            print_report(&r, r.to_text(), json)
        }
        Command::Selfcheck => {
            let mut failed = 0;
            for outcome in run_selfcheck() {
                match &outcome.result {
                    Ok(()) => println!("ok    {}", outcome.name),
                    Err(msg) => {
                        failed += 1;
                        println!("FAIL  {}: {msg}", outcome.name);
                    }
                }
            }
            if failed > 0 {
                return Err(Error::Estimator(format!("{failed} self-check(s) failed")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
