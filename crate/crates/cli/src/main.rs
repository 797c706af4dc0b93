//! `cmzd`: zero-dispersion limits, ε-sweeps and shock reports from the command line.
//!
//! Exit codes: 0 success, 2 when some points or runs failed, 64 for an
//! invalid configuration.

mod commands;
mod scenario;

use clap::{Parser, Subcommand};

use commands::{EXIT_CONFIG, EXIT_PARTIAL};
use scenario::{ConfigInvalid, ScenarioArgs};

#[derive(Debug, Parser)]
#[command(name = "cmzd", version, about = "Zero-dispersion limits of the Calogero-Moser derivative NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate ZD(t, x) on a grid and write CSV.
    Zd(ScenarioArgs),
    /// Run the simulator over an ε list and tabulate weak-pairing errors.
    Sweep(ScenarioArgs),
    /// Report the shock time, critical values and ℓ(x) as JSON.
    Shock(ScenarioArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let (args, run): (&ScenarioArgs, fn(&scenario::Scenario) -> _) = match &cli.command {
        Command::Zd(a) => (a, commands::cmd_zd),
        Command::Sweep(a) => (a, commands::cmd_sweep),
        Command::Shock(a) => (a, commands::cmd_shock),
    };
    let scenario = match args.resolve() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config: {e}");
            std::process::exit(EXIT_CONFIG);
        }
    };
    let code = match run(&scenario) {
        Ok(c) => c,
        Err(e) if e.is::<ConfigInvalid>() => {
            eprintln!("config: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PARTIAL
        }
    };
    std::process::exit(code);
}
