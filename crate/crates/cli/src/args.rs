//! Command-line flags. Every flag is optional so that only the flags actually
//! given are layered over the configuration file; field names match the
//! configuration keys.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Format;

#[derive(Debug, Parser)]
#[command(name = "optcast", version, about = "Option-price forecasting experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic GBM quote series.
    Synth(SynthArgs),
    /// Extrapolate each day's option price one trading day ahead.
    Qrm(QrmArgs),
    /// Train the LSTM trend classifier.
    Train(TrainArgs),
    /// Backtest the threshold strategy on QRM or classifier signals.
    Backtest(BacktestArgs),
    /// Joint precision and unanimous-vote diagnostics.
    Fuse(FuseArgs),
    /// Binomial wealth projection.
    Binomial(BinomialArgs),
    /// Re-run a command from its manifest and compare the outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// TOML file of `key = value` settings; flags take precedence.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long = "out", value_name = "DIR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Format of the summary printed to stdout.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotingArg {
    MidSpread,
    StockEdges,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Initial stock price (required here or in the config file).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Number of trading days.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub days: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spread_bp: Option<f64>,
    /// Defaults to s0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    /// Years to expiry after the last day.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_maturity: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quoting: Option<QuotingArg>,
    /// First date (YYYY-MM-DD).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
}

#[derive(Debug, Args, Serialize)]
pub struct QrmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Quote CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_tau: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Forecast horizon in years.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Quote CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// QRM estimate CSV written by `qrm`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub est: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_fraction: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Qrm,
    Classifier,
}

#[derive(Debug, Args, Serialize)]
pub struct BacktestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Quote CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Signal CSV: `est.csv` from `qrm` or `predictions.csv` from `train`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signals: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Args, Serialize)]
pub struct FuseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    /// CSV with a `truth` column and one 0/1 prediction column per model.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub models: Option<PathBuf>,
    /// Fold the built-in reference model precisions as well.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub reference: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BinomialArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Up-move probability (a model precision).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ror: Option<f64>,
    /// Defaults to 1/ror.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub days: Option<usize>,
    /// Initial capital.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capital: Option<f64>,
    /// Expected horizon for the Wald log-expectation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_days: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Write the outputs here instead of the recorded directory.
    #[arg(long = "out", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}
