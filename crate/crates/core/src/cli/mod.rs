//! Command-line surface: one subcommand per workflow stage, all sharing a run
//! directory and a flat `key = value` configuration.

mod commands;
mod files;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::data::{DataError, RunConfig};
use crate::model::format::FormatError;
use crate::predictive::PredictiveError;
use crate::sampler::SamplerError;

pub use files::{read_dataset_csv, write_dataset_csv};

#[derive(Debug, Parser)]
#[command(name = "bnpclaims", version, about = "Nonparametric Bayesian mixtures for claims frequency and severity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Freq,
    Sev,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-component data set and a matching run.conf
    Simulate {
        #[arg(long, value_enum, default_value = "freq")]
        kind: SimKind,
        #[arg(long, default_value_t = 600)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for the CSV files and run.conf
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the Poisson-regression mixture and write draws.txt
    FitFreq(RunArgs),
    /// Fit the log-normal-regression mixture and write draws.txt
    FitSev(RunArgs),
    /// Posterior predictive tables for the held-out rows
    Predict {
        #[command(flatten)]
        run: RunArgs,
        /// Predict at raw covariate values instead, printing to stdout
        #[arg(long, value_name = "V1,V2,...")]
        at: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        exposure: f64,
    },
    /// MSE and chi-square against the parametric baseline
    Evaluate(RunArgs),
    /// Co-clustering dissimilarity, heat map and point partition
    Cluster(RunArgs),
    /// ESS, Geweke z and autocorrelations of scalar traces
    Diagnose(RunArgs),
}

/// Settings shared by the run subcommands. Flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Configuration file of key = value lines
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Run directory
    #[arg(long)]
    pub out_dir: Option<String>,
    #[arg(long)]
    pub freq: Option<String>,
    #[arg(long)]
    pub sev: Option<String>,
    /// Comma-separated covariate columns
    #[arg(long)]
    pub covariates: Option<String>,
    /// dp or py
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub iterations: Option<String>,
    #[arg(long)]
    pub burn_in: Option<String>,
    #[arg(long)]
    pub thinning: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub train_size: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<String>,
    #[arg(long)]
    pub split_seed: Option<String>,
    #[arg(long)]
    pub y_max: Option<String>,
    #[arg(long)]
    pub cut: Option<String>,
    /// Any configuration key, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("out_dir", &self.out_dir),
            ("freq_path", &self.freq),
            ("sev_path", &self.sev),
            ("covariates", &self.covariates),
            ("process", &self.process),
            ("iterations", &self.iterations),
            ("burn_in", &self.burn_in),
            ("thinning", &self.thinning),
            ("seed", &self.seed),
            ("train_size", &self.train_size),
            ("train_fraction", &self.train_fraction),
            ("split_seed", &self.split_seed),
            ("y_max", &self.y_max),
            ("cut", &self.cut),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Validation(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k, v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

/// Failure classes with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Numeric { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PredictiveError> for CliError {
    fn from(e: PredictiveError) -> Self {
        match e {
            PredictiveError::Numeric(_) | PredictiveError::TailMassTooLarge { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::RankDeficient | AnalysisError::NoConvergence { .. } | AnalysisError::DegenerateSeries => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(_) => CliError::Io(e.to_string()),
            FormatError::Parse { .. } => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { kind, n, seed, out } => commands::simulate(kind, n, seed, &out),
        Command::FitFreq(a) => commands::fit(crate::model::Family::PoissonFrequency, &a.resolve()?),
        Command::FitSev(a) => commands::fit(crate::model::Family::NormalSeverity, &a.resolve()?),
        Command::Predict { run, at: Some(at), exposure } => commands::predict_at(&run.resolve()?, &at, exposure),
        Command::Predict { run, at: None, .. } => commands::predict(&run.resolve()?),
        Command::Evaluate(a) => commands::evaluate(&a.resolve()?),
        Command::Cluster(a) => commands::cluster(&a.resolve()?),
        Command::Diagnose(a) => commands::diagnose(&a.resolve()?),
    }
}
