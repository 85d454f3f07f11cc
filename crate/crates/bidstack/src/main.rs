use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bidstack::commands::{self, Output, RunOptions};
use bidstack::output::write_atomic;
use bidstack::{CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Structural bid stack electricity pricing.
///
/// Prices are in currency/MWh, demand is normalised to total capacity 1,
/// time is in years and rates are continuously compounded.
#[derive(Parser)]
#[command(name = "bidstack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (defaults to the built-in reference parameters).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Price every hour of a plant strip instead of the cached grid.
    #[arg(long, global = true)]
    exact_hours: bool,
    /// Enable the spike and negative-price extension.
    #[arg(long, global = true)]
    spike: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Spot price and region at one (demand, s_c, s_g) point.
    PriceSpot,
    /// Forward prices: closed form, quadrature and Monte Carlo.
    PriceForward,
    /// Spread options: stack, Margrabe, cointegration and implied correlation.
    PriceSpread,
    /// Plant value sweep over mean demand.
    ValuePlant,
    /// Implied power-fuel correlation per grid point.
    ImpliedCorr,
    /// Spot price path dump.
    Simulate,
    /// Built-in scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.mc.seed = seed;
    }
    if cli.common.spike {
        cfg.spike.enabled = true;
    }
    if cli.common.out.is_some() {
        cfg.out = cli.common.out.clone();
    }
    cfg.validate()?;
    let opts = RunOptions { exact_hours: cli.common.exact_hours };
    let Output { table, summary } = match cli.command {
        Command::PriceSpot => commands::price_spot(&cfg)?,
        Command::PriceForward => commands::price_forward(&cfg)?,
        Command::PriceSpread => commands::price_spread(&cfg)?,
        Command::ValuePlant => commands::value_plant(&cfg, opts)?,
        Command::ImpliedCorr => commands::implied_corr(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Scenario { action: ScenarioAction::List } => commands::scenario_list(&cfg)?,
    };
    let bytes = table.to_csv()?;
    match &cfg.out {
        Some(path) => {
            write_atomic(path, &bytes)?;
            if let Some(s) = summary {
                println!("{s}");
            }
        }
        None => {
            std::io::stdout().write_all(&bytes)?;
            if let Some(s) = summary {
                eprintln!("{s}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
