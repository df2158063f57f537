//! Fixtures shared by the benchmarks.

use optcast_core::market_data::{self, FeatureVector, OptionQuoting, SyntheticSpec};
use optcast_core::QuoteRecord;

/// A year of exact Black-Scholes quotes around an at-the-money strike.
pub fn quote_series(days: usize) -> Vec<QuoteRecord> {
    let mut spec = SyntheticSpec::new(100.0, 0.2, 0.05, days, 17);
    spec.quoting = OptionQuoting::StockEdges;
    market_data::generate_gbm(&spec).expect("valid synthetic spec")
}

/// One feature window of the size the classifier consumes.
pub fn feature_window() -> Vec<FeatureVector> {
    let records = quote_series(12);
    let est: Vec<Option<f64>> = records.iter().map(|r| Some(r.option_mid())).collect();
    market_data::build_sequences(&records, &est)
        .expect("enough records")
        .swap_remove(0)
        .window
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        assert_eq!(quote_series(30).len(), 30);
        let w = feature_window();
        assert_eq!(w.len(), market_data::WINDOW);
        assert_eq!(w[0].0.len(), market_data::N_FEATURES);
    }
}
