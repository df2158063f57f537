//! Per-command run configurations.
//!
//! A configuration is resolved in three layers: the struct defaults, then an
//! optional TOML file of flat `key = value` pairs, then the command-line
//! flags. Unknown keys are rejected at every layer.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use optcast_core::lstm::Optimizer;
use optcast_core::market_data::OptionQuoting;
use optcast_core::qrm::QrmConfig;
use optcast_core::trading::SignalMode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn dot() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub s0: Option<f64>,
    pub sigma: f64,
    pub drift: f64,
    pub rate: f64,
    pub days: usize,
    pub spread_bp: f64,
    pub strike: Option<f64>,
    pub residual_maturity: f64,
    pub quoting: OptionQuoting,
    pub start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            out_dir: dot(),
            format: Format::Json,
            seed: 0,
            s0: None,
            sigma: 0.2,
            drift: 0.0,
            rate: 0.0,
            days: 252,
            spread_bp: 20.0,
            strike: None,
            residual_maturity: 0.25,
            quoting: OptionQuoting::MidSpread,
            start: NaiveDate::from_ymd_opt(2024, 1, 2).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QrmRunConfig {
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub n_s: usize,
    pub n_tau: usize,
    pub beta: f64,
    pub horizon: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for QrmRunConfig {
    fn default() -> Self {
        let q = QrmConfig::default();
        Self {
            out_dir: dot(),
            format: Format::Json,
            seed: 0,
            input: None,
            n_s: q.n_s,
            n_tau: q.n_tau,
            beta: q.beta,
            horizon: q.horizon,
            cg_tol: q.cg_tol,
            cg_max_iter: q.cg_max_iter,
        }
    }
}

impl QrmRunConfig {
    pub fn qrm(&self) -> QrmConfig {
        QrmConfig {
            n_s: self.n_s,
            n_tau: self.n_tau,
            beta: self.beta,
            horizon: self.horizon,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub input: Option<PathBuf>,
    /// QRM estimate series (`date,est,...`); without it the first feature
    /// falls back to the option mid.
    pub est: Option<PathBuf>,
    pub hidden: usize,
    pub batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        let t = optcast_core::TrainConfig::default();
        Self {
            out_dir: dot(),
            format: Format::Json,
            seed: t.seed,
            input: None,
            est: None,
            hidden: t.hidden,
            batch: t.batch,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            train_fraction: t.train_fraction,
            validation_fraction: t.validation_fraction,
            optimizer: t.optimizer,
        }
    }
}

impl TrainRunConfig {
    pub fn train(&self) -> optcast_core::TrainConfig {
        optcast_core::TrainConfig {
            hidden: self.hidden,
            batch: self.batch,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed: self.seed,
            train_fraction: self.train_fraction,
            validation_fraction: self.validation_fraction,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestRunConfig {
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub input: Option<PathBuf>,
    /// `date,est,...` for `qrm` mode, `date,prob` for `classifier` mode.
    pub signals: Option<PathBuf>,
    pub mode: SignalMode,
}

impl Default for BacktestRunConfig {
    fn default() -> Self {
        Self {
            out_dir: dot(),
            format: Format::Json,
            seed: 0,
            input: None,
            signals: None,
            mode: SignalMode::Qrm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseRunConfig {
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    /// CSV with a `truth` column and one 0/1 column per model.
    pub models: Option<PathBuf>,
    /// Also fold the built-in reference precisions.
    pub reference: bool,
}

impl Default for FuseRunConfig {
    fn default() -> Self {
        Self {
            out_dir: dot(),
            format: Format::Json,
            seed: 0,
            p1: None,
            p2: None,
            models: None,
            reference: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinomialRunConfig {
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub p: f64,
    pub ror: f64,
    /// Defaults to `1 / ror`.
    pub rol: Option<f64>,
    pub days: usize,
    pub capital: f64,
    /// Horizon for the Wald log-expectation, if wanted.
    pub expected_days: Option<f64>,
}

impl Default for BinomialRunConfig {
    fn default() -> Self {
        Self {
            out_dir: dot(),
            format: Format::Json,
            seed: 0,
            p: 0.56,
            ror: 2.0,
            rol: None,
            days: 1,
            capital: 1.0,
            expected_days: None,
        }
    }
}

fn toml_to_json(v: toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => Value::from(f),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.into_iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.into_iter().map(|(k, v)| (k, toml_to_json(v))).collect()),
    }
}

fn overlay(base: &mut Map<String, Value>, layer: Map<String, Value>) {
    for (k, v) in layer {
        base.insert(k, v);
    }
}

fn as_object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Defaults, then `file`, then `flags` (which serializes only the flags
/// actually given).
pub fn resolve<C>(file: Option<&Path>, flags: &impl Serialize) -> CliResult<C>
where
    C: Serialize + DeserializeOwned + Default,
{
    let mut merged = as_object(serde_json::to_value(C::default())?);
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        overlay(&mut merged, as_object(toml_to_json(toml::Value::Table(table))));
    }
    overlay(&mut merged, as_object(serde_json::to_value(flags)?));
    let source = file.map_or_else(String::new, |p| format!(" (config file {})", p.display()));
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid configuration{source}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    }

    fn write(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("run.toml");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = write(dir.path(), "sigma = 0.3\ndays = 40\nstart = 2023-03-01\n");
        let cfg: SynthConfig = resolve(Some(&file), &Flags { sigma: Some(0.4) }).unwrap();
        assert_eq!(cfg.sigma, 0.4);
        assert_eq!(cfg.days, 40);
        assert_eq!(cfg.start, NaiveDate::from_ymd_opt(2023, 3, 1).unwrap());
        assert_eq!(cfg.spread_bp, 20.0);
        let cfg: SynthConfig = resolve(Some(&file), &Flags { sigma: None }).unwrap();
        assert_eq!(cfg.sigma, 0.3);
        let cfg: SynthConfig = resolve(None, &Flags { sigma: None }).unwrap();
        assert_eq!(cfg, SynthConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = write(dir.path(), "sigmaa = 0.3\n");
        let err = resolve::<SynthConfig>(Some(&file), &Flags { sigma: None }).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("sigmaa"), "{err}");
    }

    #[test]
    fn integers_are_accepted_for_reals() {
        let dir = tempfile::tempdir().unwrap();
        let file = write(dir.path(), "s0 = 100\n");
        let cfg: SynthConfig = resolve(Some(&file), &Flags { sigma: None }).unwrap();
        assert_eq!(cfg.s0, Some(100.0));
    }
}
