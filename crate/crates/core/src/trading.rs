//! Threshold strategy and next-day bid/ask backtest.
//!
//! A contract is bought when the forecast for tomorrow is at least what it
//! costs today (`EST >= REAL(0)`, with `REAL(0)` the current option ask). Each
//! position is one contract, bought at today's ask and sold at tomorrow's
//! bid. The last day of a series never opens a position.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::QuoteRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Buy,
    Abstain,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Buy => "buy",
            Action::Abstain => "abstain",
        }
    }
}

impl std::str::FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "buy" => Ok(Action::Buy),
            "abstain" => Ok(Action::Abstain),
            other => Err(Error::domain(format!("unknown action {other:?}"))),
        }
    }
}

/// How per-day signals are read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalMode {
    /// Signal is a price forecast compared with today's ask.
    #[default]
    Qrm,
    /// Signal is an up-move probability compared with 0.5.
    Classifier,
}

pub const CLASSIFIER_THRESHOLD: f64 = 0.5;

/// `buy` iff `est >= real0`.
pub fn decide(est: f64, real0: f64) -> Result<Action> {
    if !est.is_finite() || !real0.is_finite() {
        return Err(Error::domain("decision inputs must be finite"));
    }
    if real0 <= 0.0 {
        return Err(Error::domain(format!("REAL(0) must be positive, got {real0}")));
    }
    Ok(if est >= real0 { Action::Buy } else { Action::Abstain })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeDecision {
    pub date: NaiveDate,
    pub action: Action,
    /// Signal value; `None` on days without one (always abstain).
    pub est: Option<f64>,
    /// Threshold the signal was compared with.
    pub real0: f64,
    /// Realised P&L, zero when abstaining.
    pub pnl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    /// Cumulative P&L after each tradable day.
    pub equity_curve: Vec<f64>,
    /// One decision per tradable day.
    pub trades: Vec<TradeDecision>,
    /// Profitable trades over executed trades; 0 without trades.
    pub hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSummary {
    pub final_pnl: f64,
    pub n_trades: usize,
    pub hit_rate: f64,
}

impl BacktestResult {
    pub fn final_pnl(&self) -> f64 {
        self.equity_curve.last().copied().unwrap_or(0.0)
    }

    pub fn n_trades(&self) -> usize {
        self.trades.iter().filter(|t| t.action == Action::Buy).count()
    }

    pub fn summary(&self) -> BacktestSummary {
        BacktestSummary {
            final_pnl: self.final_pnl(),
            n_trades: self.n_trades(),
            hit_rate: self.hit_rate,
        }
    }
}

pub fn backtest(records: &[QuoteRecord], signals: &[Option<f64>], mode: SignalMode) -> Result<BacktestResult> {
    if records.len() != signals.len() {
        return Err(Error::Alignment(format!(
            "{} records but {} signals",
            records.len(),
            signals.len()
        )));
    }
    if records.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: records.len(),
        });
    }

    let mut equity = 0.0;
    let mut wins = 0usize;
    let mut executed = 0usize;
    let mut equity_curve = Vec::with_capacity(records.len() - 1);
    let mut trades = Vec::with_capacity(records.len() - 1);
    for (k, pair) in records.windows(2).enumerate() {
        let (today, tomorrow) = (&pair[0], &pair[1]);
        let real0 = match mode {
            SignalMode::Qrm => today.option_ask,
            SignalMode::Classifier => CLASSIFIER_THRESHOLD,
        };
        let action = match signals[k] {
            Some(est) => decide(est, real0).map_err(|e| Error::Day {
                day: k,
                source: Box::new(e),
            })?,
            None => Action::Abstain,
        };
        let pnl = match action {
            Action::Buy => tomorrow.option_bid - today.option_ask,
            Action::Abstain => 0.0,
        };
        if action == Action::Buy {
            executed += 1;
            wins += (pnl > 0.0) as usize;
        }
        equity += pnl;
        equity_curve.push(equity);
        trades.push(TradeDecision {
            date: today.date,
            action,
            est: signals[k],
            real0,
            pnl,
        });
    }
    Ok(BacktestResult {
        equity_curve,
        trades,
        hit_rate: if executed > 0 {
            wins as f64 / executed as f64
        } else {
            0.0
        },
    })
}

pub const PLOT_HEADER: &str = "date,cumulative_pnl,trade_pnl,action";

/// Writes `date,cumulative_pnl,trade_pnl,action`, one row per tradable day.
pub fn write_plot_data<W: Write>(mut out: W, result: &BacktestResult) -> std::io::Result<()> {
    writeln!(out, "{PLOT_HEADER}")?;
    for (t, cum) in result.trades.iter().zip(&result.equity_curve) {
        writeln!(
            out,
            "{},{},{},{}",
            t.date.format("%Y-%m-%d"),
            cum,
            t.pnl,
            t.action.as_str()
        )?;
    }
    out.flush()
}

pub fn emit_plot_data(result: &BacktestResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_plot_data(std::io::BufWriter::new(file), result).map_err(|e| Error::io(path, e))
}

/// One row of the plot CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub date: NaiveDate,
    pub cumulative_pnl: f64,
    pub trade_pnl: f64,
    pub action: Action,
}

pub fn read_plot_data(path: impl AsRef<Path>) -> Result<Vec<PlotRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{generate_gbm, SyntheticSpec};
    use proptest::prelude::*;

    fn quote(d: u32, bid: f64, ask: f64) -> QuoteRecord {
        QuoteRecord {
            date: NaiveDate::from_ymd_opt(2024, 5, d).unwrap(),
            option_bid: bid,
            option_ask: ask,
            stock_bid: 100.0,
            stock_ask: 100.2,
            strike: 100.0,
            implied_vol: 0.2,
            rate: 0.0,
        }
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(decide(1.05, 1.0).unwrap(), Action::Buy);
        assert_eq!(decide(1.0, 1.0).unwrap(), Action::Buy);
        assert_eq!(decide(0.99, 1.0).unwrap(), Action::Abstain);
        assert!(decide(1.0, 0.0).is_err());
        assert!(decide(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn perfect_foresight_on_rising_prices() {
        // zero spread, strictly rising option prices: buy every day with
        // tomorrow's price as the forecast
        let recs: Vec<QuoteRecord> = (1..=10).map(|d| quote(d, d as f64, d as f64)).collect();
        let signals: Vec<Option<f64>> = (0..10)
            .map(|k| recs.get(k + 1).map(|q| q.option_mid()))
            .collect();
        let r = backtest(&recs, &signals, SignalMode::Qrm).unwrap();
        assert_eq!(r.n_trades(), 9);
        assert_eq!(r.hit_rate, 1.0);
        assert!(r.trades.iter().all(|t| t.pnl > 0.0));
    }

    #[test]
    fn abstaining_is_flat() {
        let recs: Vec<QuoteRecord> = (1..=5).map(|d| quote(d, 1.0, 1.1)).collect();
        let r = backtest(&recs, &[None; 5], SignalMode::Qrm).unwrap();
        assert_eq!(r.equity_curve, vec![0.0; 4]);
        assert_eq!(r.hit_rate, 0.0);
        let low = vec![Some(0.1); 5];
        assert_eq!(backtest(&recs, &low, SignalMode::Classifier).unwrap().equity_curve, vec![0.0; 4]);
    }

    #[test]
    fn wide_spread_loses_the_spread() {
        let mut spec = SyntheticSpec::new(100.0, 0.0, 0.0, 20, 5);
        spec.spread_bp = 200.0;
        spec.strike = Some(90.0);
        let recs = generate_gbm(&spec).unwrap();
        let r = backtest(&recs, &vec![Some(1e9); 20], SignalMode::Qrm).unwrap();
        let spread = recs[0].option_ask - recs[0].option_bid;
        assert!((spread - 0.2).abs() < 1e-12);
        assert_eq!(r.n_trades(), 19);
        assert!(r.trades.iter().all(|t| t.pnl == -spread));
    }

    #[test]
    fn misaligned_signals_rejected() {
        let recs = vec![quote(1, 1.0, 1.1), quote(2, 1.0, 1.1)];
        assert!(matches!(
            backtest(&recs, &[None], SignalMode::Qrm),
            Err(Error::Alignment(_))
        ));
        assert!(backtest(&recs[..1], &[None], SignalMode::Qrm).is_err());
    }

    #[test]
    fn plot_csv_round_trip() {
        let recs: Vec<QuoteRecord> = (1..=4).map(|d| quote(d, d as f64 * 0.3, d as f64 * 0.3 + 0.05)).collect();
        let r = backtest(&recs, &[Some(9.0), None, Some(9.0), None], SignalMode::Qrm).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        emit_plot_data(&r, &path).unwrap();
        let rows = read_plot_data(&path).unwrap();
        assert_eq!(rows.len(), 3);
        for ((row, t), cum) in rows.iter().zip(&r.trades).zip(&r.equity_curve) {
            assert_eq!(row.date, t.date);
            assert_eq!(row.trade_pnl, t.pnl);
            assert_eq!(row.cumulative_pnl, *cum);
            assert_eq!(row.action, t.action);
        }
    }

    #[test]
    fn empty_trades_emit_header_only() {
        let r = BacktestResult {
            equity_curve: vec![],
            trades: vec![],
            hit_rate: 0.0,
        };
        let mut buf = Vec::new();
        write_plot_data(&mut buf, &r).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{PLOT_HEADER}\n"));
    }

    proptest! {
        #[test]
        fn scaling_preserves_action(est in 0.01f64..100.0, real0 in 0.01f64..100.0, c in 0.01f64..100.0) {
            prop_assert_eq!(decide(est, real0).unwrap(), decide(est * c, real0 * c).unwrap());
        }

        #[test]
        fn adding_a_winning_day_never_hurts(seed in any::<u64>(), day in 0usize..29) {
            let mut spec = SyntheticSpec::new(100.0, 0.4, 0.0, 30, seed);
            spec.spread_bp = 5.0;
            let recs = generate_gbm(&spec).unwrap();
            let mut signals = vec![None; 30];
            let base = backtest(&recs, &signals, SignalMode::Qrm).unwrap().final_pnl();
            if recs[day + 1].option_bid > recs[day].option_ask {
                signals[day] = Some(f64::MAX / 2.0);
                let more = backtest(&recs, &signals, SignalMode::Qrm).unwrap().final_pnl();
                prop_assert!(more > base);
            }
        }
    }
}
