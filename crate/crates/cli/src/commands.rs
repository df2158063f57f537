use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use optcast_core::binomial::{self, BinomialSpec};
use optcast_core::fusion::{self, ModelReport, REFERENCE_PRECISIONS};
use optcast_core::lstm;
use optcast_core::market_data::{self, QuoteRecord, SyntheticSpec};
use optcast_core::qrm;
use optcast_core::trading::{self, SignalMode};
use serde_json::{json, Value};

use crate::config::{
    BacktestRunConfig, BinomialRunConfig, Format, FuseRunConfig, QrmRunConfig, SynthConfig, TrainRunConfig,
};
use crate::error::{CliError, CliResult};
use crate::manifest::{self, Manifest};

pub const QUOTES_CSV: &str = "quotes.csv";
pub const EST_CSV: &str = "est.csv";
pub const MODEL_JSON: &str = "model.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const PREDICTIONS_CSV: &str = "predictions.csv";
pub const EQUITY_CSV: &str = "equity.csv";
pub const BACKTEST_JSON: &str = "backtest.json";
pub const FUSION_JSON: &str = "fusion.json";
pub const BINOMIAL_JSON: &str = "binomial.json";
pub const WEALTH_CSV: &str = "wealth.csv";

/// A fully resolved command.
#[derive(Debug, Clone)]
pub enum RunConfig {
    Synth(SynthConfig),
    Qrm(QrmRunConfig),
    Train(TrainRunConfig),
    Backtest(BacktestRunConfig),
    Fuse(FuseRunConfig),
    Binomial(BinomialRunConfig),
}

macro_rules! each {
    ($self:expr, $c:ident => $body:expr) => {
        match $self {
            RunConfig::Synth($c) => $body,
            RunConfig::Qrm($c) => $body,
            RunConfig::Train($c) => $body,
            RunConfig::Backtest($c) => $body,
            RunConfig::Fuse($c) => $body,
            RunConfig::Binomial($c) => $body,
        }
    };
}

/// Result of a command: the printed summary and the files written.
pub struct Outcome {
    pub summary: Value,
    pub files: Vec<String>,
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Synth(_) => "synth",
            RunConfig::Qrm(_) => "qrm",
            RunConfig::Train(_) => "train",
            RunConfig::Backtest(_) => "backtest",
            RunConfig::Fuse(_) => "fuse",
            RunConfig::Binomial(_) => "binomial",
        }
    }

    pub fn out_dir(&self) -> &Path {
        each!(self, c => &c.out_dir)
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        each!(self, c => c.out_dir = dir)
    }

    pub fn seed(&self) -> u64 {
        each!(self, c => c.seed)
    }

    pub fn format(&self) -> Format {
        each!(self, c => c.format)
    }

    pub fn to_json(&self) -> CliResult<Value> {
        Ok(each!(self, c => serde_json::to_value(c)?))
    }

    pub fn from_manifest(command: &str, config: Value) -> CliResult<Self> {
        let bad = |e: serde_json::Error| CliError::Usage(format!("manifest config for `{command}`: {e}"));
        Ok(match command {
            "synth" => RunConfig::Synth(serde_json::from_value(config).map_err(bad)?),
            "qrm" => RunConfig::Qrm(serde_json::from_value(config).map_err(bad)?),
            "train" => RunConfig::Train(serde_json::from_value(config).map_err(bad)?),
            "backtest" => RunConfig::Backtest(serde_json::from_value(config).map_err(bad)?),
            "fuse" => RunConfig::Fuse(serde_json::from_value(config).map_err(bad)?),
            "binomial" => RunConfig::Binomial(serde_json::from_value(config).map_err(bad)?),
            other => return Err(CliError::Usage(format!("unknown command `{other}` in manifest"))),
        })
    }

    fn execute(&self) -> CliResult<Outcome> {
        match self {
            RunConfig::Synth(c) => synth(c),
            RunConfig::Qrm(c) => run_qrm(c),
            RunConfig::Train(c) => run_train(c),
            RunConfig::Backtest(c) => run_backtest(c),
            RunConfig::Fuse(c) => fuse(c),
            RunConfig::Binomial(c) => run_binomial(c),
        }
    }
}

/// Runs the command and writes its manifest next to the outputs.
pub fn run(config: &RunConfig) -> CliResult<(Outcome, Manifest)> {
    let out = config.out_dir();
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let outcome = config.execute()?;
    let manifest = Manifest::new(config.name(), config.to_json()?, config.seed(), out, &outcome.files)?;
    manifest.save(&out.join(manifest::file_name(config.name())))?;
    Ok((outcome, manifest))
}

/// Re-runs a manifest and compares every artifact digest.
pub fn replay(path: &Path, out_dir: Option<PathBuf>) -> CliResult<Value> {
    let recorded = Manifest::load(path)?;
    let mut config = RunConfig::from_manifest(&recorded.command, recorded.config.clone())?;
    if let Some(dir) = out_dir {
        config.set_out_dir(dir);
    }
    let (_, fresh) = run(&config)?;
    let fresh: HashMap<&str, &str> = fresh
        .artifacts
        .iter()
        .map(|a| (a.path.as_str(), a.sha256.as_str()))
        .collect();
    let mut mismatched = Vec::new();
    for a in &recorded.artifacts {
        if fresh.get(a.path.as_str()) != Some(&a.sha256.as_str()) {
            mismatched.push(a.path.clone());
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Mismatch(format!("outputs differ: {}", mismatched.join(", "))));
    }
    Ok(json!({
        "command": recorded.command,
        "artifacts": recorded.artifacts.len(),
        "identical": true,
    }))
}

pub fn render(summary: &Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(summary).unwrap_or_default(),
        Format::Csv => {
            let mut out = String::from("key,value");
            if let Value::Object(map) = summary {
                for (k, v) in map {
                    let v = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    let _ = write!(out, "\n{k},{v}");
                }
            }
            out
        }
    }
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Domain errors from user-supplied numbers are usage errors.
fn usage(e: optcast_core::Error) -> CliError {
    match e {
        optcast_core::Error::Domain(msg) => CliError::Usage(msg),
        other => CliError::Core(other),
    }
}

fn synth(c: &SynthConfig) -> CliResult<Outcome> {
    let s0 = *require(&c.s0, "s0")?;
    let spec = SyntheticSpec {
        s0,
        sigma: c.sigma,
        rate: c.rate,
        drift: c.drift,
        n_days: c.days,
        seed: c.seed,
        spread_bp: c.spread_bp,
        strike: c.strike,
        residual_maturity: c.residual_maturity,
        quoting: c.quoting,
        start: c.start,
    };
    let records = market_data::generate_gbm(&spec)?;
    let header = market_data::synthetic_header(c.seed);
    market_data::save_csv(c.out_dir.join(QUOTES_CSV), &records, Some(&header))?;
    let (first, last) = (&records[0], &records[records.len() - 1]);
    Ok(Outcome {
        summary: json!({
            "rows": records.len(),
            "first_date": first.date,
            "last_date": last.date,
            "first_option_mid": first.option_mid(),
            "last_option_mid": last.option_mid(),
            "last_stock_mid": last.stock_mid(),
        }),
        files: vec![QUOTES_CSV.into()],
    })
}

fn run_qrm(c: &QrmRunConfig) -> CliResult<Outcome> {
    let records = market_data::load_csv(require(&c.input, "input")?)?;
    let estimates = qrm::estimate_series(&records, &c.qrm())?;
    let mut csv = String::from("date,est,real0,residual\n");
    let (mut err_sum, mut naive_sum, mut scored) = (0.0, 0.0, 0usize);
    let mut max_iterations = 0;
    for (k, e) in estimates.iter().enumerate() {
        let Some(e) = e else { continue };
        let today = &records[k];
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            today.date.format("%Y-%m-%d"),
            e.est,
            today.option_ask,
            e.residual
        );
        max_iterations = max_iterations.max(e.iterations);
        if let Some(next) = records.get(k + 1).map(QuoteRecord::option_mid) {
            if next > 0.0 {
                err_sum += (e.est - next).abs() / next;
                naive_sum += (today.option_mid() - next).abs() / next;
                scored += 1;
            }
        }
    }
    write_file(&c.out_dir.join(EST_CSV), &csv)?;
    let mean = |s: f64| (scored > 0).then(|| s / scored as f64);
    Ok(Outcome {
        summary: json!({
            "rows": estimates.iter().flatten().count(),
            "scored_days": scored,
            "mean_relative_error": mean(err_sum),
            "naive_mean_relative_error": mean(naive_sum),
            "max_cg_iterations": max_iterations,
        }),
        files: vec![EST_CSV.into()],
    })
}

/// Reads `date` and one named column of a signal CSV.
fn read_series(path: &Path, column: &str) -> CliResult<Vec<(NaiveDate, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: no `{name}` column", path.display())))
    };
    let (di, vi) = (find("date")?, find(column)?);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| CliError::Data(format!("{}: row {}: bad {what}", path.display(), row + 2));
        let date: NaiveDate = rec[di].trim().parse().map_err(|_| bad("date"))?;
        let value: f64 = rec[vi].trim().parse().map_err(|_| bad(column))?;
        out.push((date, value));
    }
    Ok(out)
}

/// Places each dated value on its quote day; every date must exist.
fn align(series: &[(NaiveDate, f64)], records: &[QuoteRecord], path: &Path) -> CliResult<Vec<Option<f64>>> {
    let index: HashMap<NaiveDate, usize> = records.iter().enumerate().map(|(i, r)| (r.date, i)).collect();
    let mut out = vec![None; records.len()];
    for (date, value) in series {
        let i = *index
            .get(date)
            .ok_or_else(|| CliError::Data(format!("{}: {date} has no quote", path.display())))?;
        if out[i].replace(*value).is_some() {
            return Err(CliError::Data(format!("{}: duplicate date {date}", path.display())));
        }
    }
    Ok(out)
}

fn run_train(c: &TrainRunConfig) -> CliResult<Outcome> {
    let records = market_data::load_csv(require(&c.input, "input")?)?;
    let estimates = match &c.est {
        Some(path) => align(&read_series(path, "est")?, &records, path)?,
        None => vec![None; records.len()],
    };
    let samples = market_data::build_sequences(&records, &estimates)?;
    let model = lstm::train(&samples, &c.train())?;
    model.save(c.out_dir.join(MODEL_JSON))?;

    let best = model.history[model.best_epoch - 1].validation;
    write_json(
        &c.out_dir.join(METRICS_JSON),
        &json!({
            "samples": samples.len(),
            "best_epoch": model.best_epoch,
            "validation": best,
            "history": model.history,
        }),
    )?;

    let mut csv = String::from("date,prob\n");
    for s in &samples {
        let p = model.predict(&s.window)?;
        let _ = writeln!(csv, "{},{}", records[s.end].date.format("%Y-%m-%d"), p);
    }
    write_file(&c.out_dir.join(PREDICTIONS_CSV), &csv)?;
    Ok(Outcome {
        summary: json!({
            "samples": samples.len(),
            "best_epoch": model.best_epoch,
            "validation_accuracy": best.accuracy,
            "validation_precision": best.precision,
            "validation_recall": best.recall,
        }),
        files: vec![MODEL_JSON.into(), METRICS_JSON.into(), PREDICTIONS_CSV.into()],
    })
}

fn run_backtest(c: &BacktestRunConfig) -> CliResult<Outcome> {
    let records = market_data::load_csv(require(&c.input, "input")?)?;
    let path = require(&c.signals, "signals")?;
    let column = match c.mode {
        SignalMode::Qrm => "est",
        SignalMode::Classifier => "prob",
    };
    let signals = align(&read_series(path, column)?, &records, path)?;
    let result = trading::backtest(&records, &signals, c.mode)?;
    trading::emit_plot_data(&result, c.out_dir.join(EQUITY_CSV))?;
    let summary = result.summary();
    write_json(&c.out_dir.join(BACKTEST_JSON), &summary)?;
    Ok(Outcome {
        summary: serde_json::to_value(summary)?,
        files: vec![EQUITY_CSV.into(), BACKTEST_JSON.into()],
    })
}

fn read_models(path: &Path) -> CliResult<(Vec<ModelReport>, Vec<bool>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let headers = rdr.headers()?.clone();
    let truth_col = headers
        .iter()
        .position(|h| h == "truth")
        .ok_or_else(|| CliError::Data(format!("{}: no `truth` column", path.display())))?;
    let mut truth = Vec::new();
    let mut reports: Vec<ModelReport> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != truth_col)
        .map(|(_, name)| ModelReport::new(name, Vec::new()))
        .collect();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let flag = |s: &str| match s.trim() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(CliError::Data(format!(
                "{}: row {}: expected 0/1, got {other:?}",
                path.display(),
                row + 2
            ))),
        };
        let mut models = reports.iter_mut();
        for (i, field) in rec.iter().enumerate() {
            if i == truth_col {
                truth.push(flag(field)?);
            } else if let Some(m) = models.next() {
                m.predictions.push(flag(field)?);
            }
        }
    }
    Ok((reports, truth))
}

fn fuse(c: &FuseRunConfig) -> CliResult<Outcome> {
    let mut report = serde_json::Map::new();
    match (c.p1, c.p2) {
        (Some(p1), Some(p2)) => {
            let joint = fusion::joint_precision(p1, p2).map_err(usage)?;
            report.insert("joint_precision".into(), json!(joint));
        }
        (None, None) => {}
        _ => return Err(CliError::Usage("--p1 and --p2 must be given together".into())),
    }
    if c.reference {
        let precisions: Vec<f64> = REFERENCE_PRECISIONS.iter().map(|(_, p)| *p).collect();
        let models: serde_json::Map<String, Value> =
            REFERENCE_PRECISIONS.iter().map(|(n, p)| (n.to_string(), json!(p))).collect();
        report.insert(
            "reference".into(),
            json!({
                "models": models,
                "independent_joint_precision": fusion::joint_precision_all(&precisions)?,
            }),
        );
    }
    if let Some(path) = &c.models {
        let (reports, truth) = read_models(path)?;
        report.insert("unanimous".into(), serde_json::to_value(fusion::unanimous_combine(&reports, &truth)?)?);
    }
    if report.is_empty() {
        return Err(CliError::Usage("nothing to fuse: give --p1/--p2, --models or --reference".into()));
    }
    let report = Value::Object(report);
    write_json(&c.out_dir.join(FUSION_JSON), &report)?;
    Ok(Outcome {
        summary: report,
        files: vec![FUSION_JSON.into()],
    })
}

fn run_binomial(c: &BinomialRunConfig) -> CliResult<Outcome> {
    let rol = c.rol.unwrap_or(1.0 / c.ror);
    let spec = BinomialSpec::new(c.p, c.ror, rol, c.capital, c.days).map_err(usage)?;
    let martingale = binomial::martingale_check(&spec);
    let mut files = Vec::new();
    let mut report = json!({
        "expectation": binomial::expected_wealth(&spec),
        "growth": martingale.per_step_growth,
        "is_martingale": martingale.is_martingale,
        "p": spec.p,
        "ror": spec.ror,
        "rol": spec.rol,
        "capital": spec.initial,
        "days": spec.days,
    });
    if spec.days <= binomial::ENUMERATION_LIMIT {
        let dist = binomial::enumerate_tree(&spec)?;
        write_file(&c.out_dir.join(WEALTH_CSV), &dist.to_csv())?;
        report["tree_expectation"] = json!(dist.expectation);
        files.push(WEALTH_CSV.to_string());
    }
    if let Some(days) = c.expected_days {
        report["wald_log_expectation"] = json!(binomial::wald_log_expectation(&spec, days).map_err(usage)?);
    }
    write_json(&c.out_dir.join(BINOMIAL_JSON), &report)?;
    files.push(BINOMIAL_JSON.into());
    Ok(Outcome { summary: report, files })
}
