//! End-to-end pipeline through the library API.

use optcast_core::market_data::{self, SyntheticSpec};
use optcast_core::trading::{self, SignalMode};
use optcast_core::{lstm, qrm, QrmConfig, TrainConfig};

#[test]
fn csv_round_trip_preserves_records() {
    let records = market_data::generate_gbm(&SyntheticSpec::new(100.0, 0.3, 0.05, 60, 3)).unwrap();
    let mut buf = Vec::new();
    market_data::write_csv(&mut buf, &records, Some(&market_data::synthetic_header(3))).unwrap();
    assert_eq!(market_data::read_csv(buf.as_slice()).unwrap(), records);
}

#[test]
fn synth_qrm_train_backtest() {
    let records = market_data::generate_gbm(&SyntheticSpec::new(100.0, 0.2, 0.0, 120, 11)).unwrap();
    let estimates = qrm::estimate_series(&records, &QrmConfig::default()).unwrap();
    assert_eq!(estimates.len(), records.len());
    assert!(estimates[0].is_none());
    assert!(estimates[1..].iter().all(|e| e.is_some_and(|d| d.est.is_finite() && d.est >= 0.0)));

    let est: Vec<Option<f64>> = estimates.iter().map(|e| e.map(|d| d.est)).collect();
    let samples = market_data::build_sequences(&records, &est).unwrap();
    assert_eq!(samples.len(), records.len() - market_data::WINDOW);

    let config = TrainConfig {
        hidden: 8,
        epochs: 3,
        ..TrainConfig::default()
    };
    let model = lstm::train(&samples, &config).unwrap();
    assert_eq!(model.history.len(), 3);
    let again = lstm::train(&samples, &config).unwrap();
    assert_eq!(model.to_json().unwrap(), again.to_json().unwrap());

    let qrm_run = trading::backtest(&records, &est, SignalMode::Qrm).unwrap();
    let total: f64 = qrm_run.trades.iter().map(|t| t.pnl).sum();
    assert!((qrm_run.final_pnl() - total).abs() < 1e-9);

    let mut probs = vec![None; records.len()];
    for s in &samples {
        probs[s.end] = Some(model.predict(&s.window).unwrap());
    }
    let cls = trading::backtest(&records, &probs, SignalMode::Classifier).unwrap();
    assert!(cls.n_trades() <= samples.len());
}
