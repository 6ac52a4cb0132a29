//! Batch runs of the causal demand model. Every command reads a flat JSON
//! run configuration (flags override its keys), writes its artefacts under
//! the output directory and records them in a manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use clap::{Parser, Subcommand};

pub use config::{Overrides, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gridcause", version, about = "Causal Bayesian model of hourly electricity demand")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Join a load CSV and a weather CSV into the canonical dataset
    Ingest,
    /// Sample a synthetic dataset from the structural model
    Simulate,
    /// Fit the variational posterior
    Train,
    /// Plug-in forecasts from a saved posterior
    Predict,
    /// Chronological train/test evaluation
    Evaluate,
    /// Contiguous k-fold cross-validation
    Crossval,
    /// Confounding diagnostics
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// Gather analysis outputs into one directory of plot-ready CSVs
    Report,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Analysis {
    /// Humidity correlation, its confidence density, stratified slope and threshold search
    Humidity,
    /// Two-stage versus joint temperature regressions by month
    Temperature,
    /// Radiation slopes by season and time of day
    Radiation,
    /// Wind slopes in hot and cold temperature bands
    Wind,
    /// Adjusted regression against the interventional slope on a linear model
    Backdoor,
    /// Demand variance by month
    Variance,
}

pub fn run(cli: &Cli) -> Result<commands::Messages, CliError> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match &cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Simulate => commands::simulate_cmd(&cfg),
        Command::Train => commands::train_cmd(&cfg),
        Command::Predict => commands::predict_cmd(&cfg),
        Command::Evaluate => commands::evaluate_cmd(&cfg),
        Command::Crossval => commands::crossval_cmd(&cfg),
        Command::Analyze { what } => match what {
            Analysis::Humidity => commands::analyze_humidity(&cfg),
            Analysis::Temperature => commands::analyze_temperature(&cfg),
            Analysis::Radiation => commands::analyze_radiation(&cfg),
            Analysis::Wind => commands::analyze_wind(&cfg),
            Analysis::Backdoor => commands::analyze_backdoor(&cfg),
            Analysis::Variance => commands::analyze_variance(&cfg),
        },
        Command::Report => commands::report_cmd(&cfg),
    }
}
