//! Binomial wealth expectation.
//!
//! Each trading day the whole portfolio either grows by `ror` (probability
//! `p`, the precision of the signal) or shrinks by `rol`. After `k` days the
//! wealth is `C · ror^j · rol^(k-j)` with binomial probability, and the
//! expectation collapses to `C · (p·ror + (1-p)·rol)^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest horizon [`enumerate_tree`] accepts.
pub const ENUMERATION_LIMIT: usize = 30;

/// Largest horizon [`enumerate_paths`] accepts.
pub const PATH_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialSpec {
    pub p: f64,
    pub ror: f64,
    pub rol: f64,
    pub initial: f64,
    pub days: usize,
}

impl BinomialSpec {
    pub fn new(p: f64, ror: f64, rol: f64, initial: f64, days: usize) -> Result<Self> {
        let spec = Self {
            p,
            ror,
            rol,
            initial,
            days,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Down-multiplier `1 / ror`.
    pub fn symmetric(p: f64, ror: f64, initial: f64, days: usize) -> Result<Self> {
        Self::new(p, ror, 1.0 / ror, initial, days)
    }

    /// `0 < p < 1`, `0 < rol <= ror`, positive capital. The degenerate
    /// `ror == rol` tree is allowed.
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.rol > 0.0 && self.rol.is_finite() && self.ror.is_finite()) {
            return Err(Error::domain(format!("rol must be positive, got {}", self.rol)));
        }
        if self.ror < self.rol {
            return Err(Error::domain(format!(
                "ror ({}) must not be below rol ({})",
                self.ror, self.rol
            )));
        }
        if !(self.initial > 0.0 && self.initial.is_finite()) {
            return Err(Error::domain(format!(
                "initial capital must be positive, got {}",
                self.initial
            )));
        }
        Ok(())
    }

    /// Expected one-day multiplier `p·ror + (1-p)·rol`.
    pub fn growth(&self) -> f64 {
        self.p * self.ror + (1.0 - self.p) * self.rol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub wealth: f64,
    pub probability: f64,
    /// Number of up-moves.
    pub ups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthDistribution {
    /// Sorted ascending by wealth.
    pub outcomes: Vec<Outcome>,
    pub expectation: f64,
}

impl WealthDistribution {
    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    /// CSV `wealth,probability`, ascending by wealth.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("wealth,probability\n");
        for o in &self.outcomes {
            out.push_str(&format!("{},{}\n", o.wealth, o.probability));
        }
        out
    }
}

pub fn expected_wealth(spec: &BinomialSpec) -> f64 {
    spec.initial * spec.growth().powi(spec.days as i32)
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Recombining tree: one outcome per up-move count.
pub fn enumerate_tree(spec: &BinomialSpec) -> Result<WealthDistribution> {
    spec.validate()?;
    let k = spec.days;
    if k > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            days: k,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut outcomes: Vec<Outcome> = (0..=k)
        .map(|j| Outcome {
            wealth: spec.initial * spec.ror.powi(j as i32) * spec.rol.powi((k - j) as i32),
            probability: binomial_coefficient(k, j)
                * spec.p.powi(j as i32)
                * (1.0 - spec.p).powi((k - j) as i32),
            ups: j,
        })
        .collect();
    outcomes.sort_by(|a, b| a.wealth.total_cmp(&b.wealth).then(a.ups.cmp(&b.ups)));
    let expectation = outcomes.iter().map(|o| o.wealth * o.probability).sum();
    Ok(WealthDistribution {
        outcomes,
        expectation,
    })
}

/// Non-recombining enumeration over all `2^k` paths, multiplying the
/// per-step factors along each path and aggregating by up-move count.
pub fn enumerate_paths(spec: &BinomialSpec) -> Result<WealthDistribution> {
    spec.validate()?;
    let k = spec.days;
    if k > PATH_LIMIT {
        return Err(Error::TooLarge {
            days: k,
            limit: PATH_LIMIT,
        });
    }
    let mut by_ups: Vec<Option<Outcome>> = vec![None; k + 1];
    let mut expectation = 0.0;
    for path in 0u64..(1u64 << k) {
        let mut wealth = spec.initial;
        let mut prob = 1.0;
        for step in 0..k {
            if path >> step & 1 == 1 {
                wealth *= spec.ror;
                prob *= spec.p;
            } else {
                wealth *= spec.rol;
                prob *= 1.0 - spec.p;
            }
        }
        expectation += wealth * prob;
        let ups = path.count_ones() as usize;
        let slot = by_ups[ups].get_or_insert(Outcome {
            wealth,
            probability: 0.0,
            ups,
        });
        slot.probability += prob;
    }
    let mut outcomes: Vec<Outcome> = by_ups.into_iter().flatten().collect();
    outcomes.sort_by(|a, b| a.wealth.total_cmp(&b.wealth).then(a.ups.cmp(&b.ups)));
    Ok(WealthDistribution {
        outcomes,
        expectation,
    })
}

/// Portfolio growth implied by next-day prices: `Σ predicted / Σ today`.
pub fn estimate_ror(today: &[f64], predicted: &[f64]) -> Result<f64> {
    if today.is_empty() || today.len() != predicted.len() {
        return Err(Error::Alignment(format!(
            "{} positions today but {} predictions",
            today.len(),
            predicted.len()
        )));
    }
    let denominator: f64 = today.iter().sum();
    if !(denominator > 0.0) {
        return Err(Error::domain(format!(
            "today's portfolio value must be positive, got {denominator}"
        )));
    }
    Ok(predicted.iter().sum::<f64>() / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub is_martingale: bool,
    pub per_step_growth: f64,
}

pub fn martingale_check(spec: &BinomialSpec) -> MartingaleReport {
    let growth = spec.growth();
    MartingaleReport {
        is_martingale: (growth - 1.0).abs() <= 1e-12,
        per_step_growth: growth,
    }
}

/// `E[N] · E[ln X]` for i.i.d. daily log-growth `X` stopped at a horizon
/// independent of the draws.
pub fn wald_log_expectation(spec: &BinomialSpec, expected_days: f64) -> Result<f64> {
    if !(expected_days > 0.0 && expected_days.is_finite()) {
        return Err(Error::domain(format!(
            "expected horizon must be positive, got {expected_days}"
        )));
    }
    Ok(expected_days * (spec.p * spec.ror.ln() + (1.0 - spec.p) * spec.rol.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn one_day_expectation() {
        let spec = BinomialSpec::new(0.56, 2.0, 0.5, 1.0, 1).unwrap();
        assert!((expected_wealth(&spec) - 1.34).abs() < 1e-12);
        let dist = enumerate_tree(&spec).unwrap();
        assert_eq!(dist.outcomes.len(), 2);
        assert_eq!(dist.outcomes[0].wealth, 0.5);
        assert!((dist.outcomes[0].probability - 0.44).abs() < 1e-15);
        assert_eq!(dist.outcomes[1].wealth, 2.0);
        assert_eq!(dist.outcomes[1].probability, 0.56);
    }

    #[test]
    fn zero_days_is_initial_capital() {
        let spec = BinomialSpec::new(0.3, 1.5, 0.8, 7.0, 0).unwrap();
        assert_eq!(expected_wealth(&spec), 7.0);
        let dist = enumerate_tree(&spec).unwrap();
        assert_eq!(dist.outcomes.len(), 1);
        assert_eq!(dist.expectation, 7.0);
    }

    #[test]
    fn five_days_against_path_sum() {
        let spec = BinomialSpec::new(2.0 / 3.0, 2.0, 0.5, 1.0, 5).unwrap();
        let paths = enumerate_paths(&spec).unwrap();
        assert!((paths.expectation - 7.59375).abs() < 1e-12);
        assert!((expected_wealth(&spec) - 7.59375).abs() < 1e-12);
    }

    #[test]
    fn fair_coin_two_days() {
        let spec = BinomialSpec::new(0.5, 2.0, 0.5, 1.0, 2).unwrap();
        let probs: Vec<f64> = enumerate_tree(&spec)
            .unwrap()
            .outcomes
            .iter()
            .map(|o| o.probability)
            .collect();
        assert_eq!(probs, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn enumeration_guard() {
        let spec = BinomialSpec::new(0.5, 1.1, 0.9, 1.0, 31).unwrap();
        assert!(matches!(enumerate_tree(&spec), Err(Error::TooLarge { .. })));
        assert!(expected_wealth(&spec).is_finite());
    }

    #[test]
    fn ror_estimates() {
        assert!((estimate_ror(&[1.0, 1.0], &[1.1, 1.3]).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(estimate_ror(&[2.0, 3.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert!(estimate_ror(&[0.0], &[1.0]).is_err());
        assert!(estimate_ror(&[1.0], &[1.0, 2.0]).is_err());
        assert!(estimate_ror(&[], &[]).is_err());
    }

    #[test]
    fn ror_on_noiseless_path() {
        use crate::bs::call_price;
        use crate::market_data::TRADING_DAY;
        // σ = 0, r = 0: the call is worth its intrinsic value every day
        let today = call_price(105.0, 0.5, 100.0, 0.0, 0.0).unwrap();
        let tomorrow = call_price(105.0, 0.5 - TRADING_DAY, 100.0, 0.0, 0.0).unwrap();
        assert_eq!(estimate_ror(&[today], &[tomorrow]).unwrap(), 1.0);
    }

    #[test]
    fn martingale_cases() {
        let worked = BinomialSpec::new(2.0 / 3.0, 2.0, 0.5, 1.0, 1).unwrap();
        let m = martingale_check(&worked);
        assert!((m.per_step_growth - 1.5).abs() < 1e-15);
        assert!(!m.is_martingale);
        let fair = BinomialSpec::new(1.0 / 3.0, 2.0, 0.5, 1.0, 1).unwrap();
        assert!(martingale_check(&fair).is_martingale);
        let flat = BinomialSpec::new(0.8, 1.0, 1.0, 1.0, 1).unwrap();
        let m = martingale_check(&flat);
        assert!(m.is_martingale && m.per_step_growth == 1.0);
    }

    #[test]
    fn wald_one_day_matches_monte_carlo() {
        let spec = BinomialSpec::new(2.0 / 3.0, 2.0, 0.5, 1.0, 1).unwrap();
        let closed = wald_log_expectation(&spec, 1.0).unwrap();
        assert!((closed - std::f64::consts::LN_2 / 3.0).abs() < 1e-15);
        let mut rng = crate::rng::seeded(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let x = if rng.random::<f64>() < spec.p { spec.ror.ln() } else { spec.rol.ln() };
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - closed).abs() <= 4.0 * se, "{mean} vs {closed}");
        assert!((wald_log_expectation(&spec, 10.0).unwrap() - 10.0 * closed).abs() < 1e-14);
        let flat = BinomialSpec::new(0.3, 1.0, 1.0, 1.0, 1).unwrap();
        assert_eq!(wald_log_expectation(&flat, 17.0).unwrap(), 0.0);
        assert!(wald_log_expectation(&spec, 0.0).is_err());
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(BinomialSpec::new(0.0, 2.0, 0.5, 1.0, 1).is_err());
        assert!(BinomialSpec::new(0.5, 0.4, 0.5, 1.0, 1).is_err());
        assert!(BinomialSpec::new(0.5, 2.0, 0.0, 1.0, 1).is_err());
        assert!(BinomialSpec::new(0.5, 2.0, 0.5, -1.0, 1).is_err());
        assert_eq!(BinomialSpec::symmetric(0.5, 2.0, 1.0, 1).unwrap().rol, 0.5);
    }

    fn arb_spec(max_days: usize) -> impl Strategy<Value = BinomialSpec> {
        (0.01f64..0.99, 1.0001f64..3.0, 0.05f64..0.9999, 0.1f64..100.0, 0..=max_days)
            .prop_map(|(p, ror, rol, initial, days)| BinomialSpec { p, ror, rol, initial, days })
    }

    proptest! {
        #[test]
        fn tree_matches_paths_and_closed_form(spec in arb_spec(12)) {
            let tree = enumerate_tree(&spec).unwrap();
            let paths = enumerate_paths(&spec).unwrap();
            let closed = expected_wealth(&spec);
            prop_assert!((tree.total_probability() - 1.0).abs() <= 1e-12);
            prop_assert!((tree.expectation - closed).abs() <= 1e-9 * closed);
            prop_assert!((paths.expectation - closed).abs() <= 1e-9 * closed);
            prop_assert_eq!(tree.outcomes.len(), spec.days + 1);
            for (a, b) in tree.outcomes.iter().zip(&paths.outcomes) {
                prop_assert_eq!(a.ups, b.ups);
                prop_assert!((a.wealth - b.wealth).abs() <= 1e-12 * a.wealth.max(1.0));
                prop_assert!((a.probability - b.probability).abs() <= 1e-12);
            }
        }

        #[test]
        fn jensen(spec in arb_spec(30)) {
            let log_mean = wald_log_expectation(&spec, spec.days.max(1) as f64).unwrap();
            let k = spec.days.max(1);
            let s = BinomialSpec { initial: 1.0, days: k, ..spec };
            prop_assert!(log_mean <= expected_wealth(&s).ln() + 1e-12);
        }

        #[test]
        fn increasing_in_parameters(spec in arb_spec(20), bump in 1e-3f64..0.05) {
            let spec = BinomialSpec { days: spec.days.max(1), ..spec };
            let base = expected_wealth(&spec);
            let more_p = BinomialSpec { p: spec.p + bump, ..spec };
            let more_ror = BinomialSpec { ror: spec.ror + bump, ..spec };
            let more_rol = BinomialSpec { rol: spec.rol + bump, ..spec };
            if more_p.p < 1.0 {
                prop_assert!(expected_wealth(&more_p) > base);
            }
            prop_assert!(expected_wealth(&more_ror) > base);
            if more_rol.rol <= spec.ror {
                prop_assert!(expected_wealth(&more_rol) > base);
            }
        }
    }
}
