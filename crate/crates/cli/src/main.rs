use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fleet_inverse::run::{self, Command, Overrides};
use fleet_inverse::{scenario, CliError};

/// Batch fleet assignment on scenario files.
#[derive(Debug, Parser)]
#[command(name = "fleet-inverse", version)]
struct Cli {
    command: Command,
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `simulation.days`.
    #[arg(long)]
    days: Option<usize>,
    /// Overrides `simulation.mu`.
    #[arg(long)]
    mu: Option<f64>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FLEET_INVERSE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| CliError::parse("invalid_value", "FLEET_INVERSE_THREADS", format!("not a count: `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::io(e.to_string()))
}

fn main_inner(cli: &Cli) -> Result<String, CliError> {
    init_threads()?;
    let sc = scenario::parse_scenario(&cli.scenario)?;
    if let Some(mu) = cli.mu {
        if !(0.0..=1.0).contains(&mu) {
            return Err(CliError::parse("invalid_value", "--mu", format!("{mu} outside [0, 1]")));
        }
    }
    if cli.days == Some(0) {
        return Err(CliError::parse("invalid_value", "--days", "must be at least 1"));
    }
    let ov = Overrides {
        seed: cli.seed,
        days: cli.days,
        mu: cli.mu,
    };
    let table = run::run(cli.command, &sc, &ov)?;
    let file = File::create(&cli.out).map_err(|e| CliError::io(format!("{}: {e}", cli.out.display())))?;
    table.write_csv(BufWriter::new(file))?;
    Ok(table.summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
