//! `irradcast`: ingest weather files, fit forecasting models, forecast and
//! evaluate them, all driven by a TOML run config.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::ForecastWindow;
use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "irradcast", version, about = "Hourly solar irradiance forecasting")]
struct Cli {
    /// Run config (TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Seed for the generator, k-fold shuffles and network training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the input files and write the cleaned canonical series.
    Ingest,
    /// Write a synthetic series in place of ingested data.
    Synth {
        /// Length in days.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Fit every configured model and write the model files.
    Fit {
        /// Canonical series to use instead of the one in the output directory.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// One-hour-ahead forecasts from fitted models.
    Forecast {
        #[arg(long)]
        series: Option<PathBuf>,
        /// Model file; repeatable. Defaults to everything `fit` wrote.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        /// First hour, YYYY-MM-DDTHH:MM.
        #[arg(long)]
        start: Option<String>,
        /// Number of hours.
        #[arg(long)]
        hours: Option<usize>,
    },
    /// Compare the configured models with the simple forecast.
    Evaluate {
        #[arg(long)]
        series: Option<PathBuf>,
        /// Only this model (label or file stem); repeatable.
        #[arg(long = "model")]
        models: Vec<String>,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_overrides(cli.seed, cli.out.clone());
    Ok(config)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Ingest => {
            let series = commands::ingest(&config)?;
            println!(
                "{} hours, {} unresolved gaps -> {}",
                series.len(),
                series.gap_report().len(),
                config.output.display()
            );
        }
        Command::Synth { days } => {
            if let Some(days) = days {
                config.synth.days = days;
            }
            let series = commands::synth(&config)?;
            println!("{} synthetic hours -> {}", series.len(), config.output.display());
        }
        Command::Fit { series } => {
            let summary = commands::fit(&config, series.as_deref())?;
            for m in &summary.models {
                let rmse = m.training.as_ref().map_or("-".into(), |t| format!("{:.3}", t.rmse));
                println!("{:<32} rmse {:>9}  {}", m.name, rmse, m.file);
            }
            for (name, reason) in &summary.failures {
                println!("{name:<32} failed: {reason}");
            }
        }
        Command::Forecast {
            series,
            models,
            start,
            hours,
        } => {
            let window = ForecastWindow { start, hours };
            for path in commands::forecast(&config, series.as_deref(), &models, &window)? {
                println!("{}", path.display());
            }
        }
        Command::Evaluate { series, models } => {
            print!("{}", commands::evaluate(&config, series.as_deref(), &models)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
