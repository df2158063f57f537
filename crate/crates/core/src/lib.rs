//! Option-price forecasting toolkit.
//!
//! The crate is organised around the stages of a daily option-forecasting
//! pipeline:
//!
//! * [`market_data`]: quote series (CSV in/out), seeded GBM synthetic data and
//!   13-feature sequence windows.
//! * [`bs`]: closed-form Black-Scholes call pricing.
//! * [`qrm`]: quasi-reversibility extrapolation of the option price one trading
//!   day ahead through the ill-posed Black-Scholes problem.
//! * [`lstm`]: a from-scratch two-layer LSTM trend classifier trained by BPTT.
//! * [`fusion`]: joint precision of independent classifiers and the
//!   unanimous-vote combiner with its independence diagnostic.
//! * [`trading`]: the `EST >= REAL(0)` threshold strategy and a bid/ask backtester.
//! * [`binomial`]: the binomial wealth-expectation engine.

pub mod binomial;
pub mod bs;
pub mod error;
pub mod fusion;
pub mod lstm;
pub mod market_data;
pub mod qrm;
pub mod rng;
pub mod trading;

pub use binomial::{BinomialSpec, MartingaleReport, WealthDistribution};
pub use bs::BsInputs;
pub use error::{Error, Result};
pub use fusion::{FusionReport, ModelReport};
pub use lstm::{LstmParams, Metrics, TrainConfig, TrainedModel};
pub use market_data::{FeatureVector, QuoteRecord, SequenceSample, SyntheticSpec};
pub use qrm::{Minimizer, QrmConfig, QrmGrid};
pub use trading::{Action, BacktestResult, SignalMode, TradeDecision};
