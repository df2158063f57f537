//! Combining binary classifiers by unanimous vote.
//!
//! For two classifiers whose positive calls are conditionally independent
//! given the truth, under a balanced prior, the precision of the "both say
//! positive" rule is
//!
//! ```text
//! P = P₁P₂ / (P₁P₂ + (1 − P₁)(1 − P₂))
//! ```
//!
//! i.e. the precisions multiply as odds. Real forecasting models share
//! inputs and are far from independent, so this value is only used as the
//! benchmark against which the measured precision of the combined vote is
//! compared (the independence gap). It is never reported as an estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precisions of the earlier forecasting models, used as demo inputs.
pub const REFERENCE_PRECISIONS: [(&str, f64); 4] = [
    ("qrm", 0.5577),
    ("binary_classification", 0.5956),
    ("regression_nn", 0.6032),
    ("cnn", 0.5714),
];

/// Joint precision of two independent positive calls.
pub fn joint_precision(p1: f64, p2: f64) -> Result<f64> {
    for p in [p1, p2] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!(
                "joint precision needs precisions strictly inside (0, 1), got {p}"
            )));
        }
    }
    let agree = p1 * p2;
    Ok(agree / (agree + (1.0 - p1) * (1.0 - p2)))
}

/// Left fold of [`joint_precision`]; the odds form makes the order
/// irrelevant up to rounding.
pub fn joint_precision_all(precisions: &[f64]) -> Result<f64> {
    let (first, rest) = precisions
        .split_first()
        .ok_or_else(|| Error::Empty("joint precision".into()))?;
    if rest.is_empty() {
        joint_precision(*first, 0.5)
    } else {
        rest.iter().try_fold(*first, |acc, &p| joint_precision(acc, p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub predictions: Vec<bool>,
    /// Claimed precision; recomputed against the truth when combining.
    pub precision: f64,
}

impl ModelReport {
    pub fn new(name: impl Into<String>, predictions: Vec<bool>) -> Self {
        Self {
            name: name.into(),
            predictions,
            precision: f64::NAN,
        }
    }
}

/// Precision of a prediction vector, `None` when it never predicts positive.
pub fn precision_of(predictions: &[bool], truth: &[bool]) -> Option<f64> {
    let (tp, positives) = predictions
        .iter()
        .zip(truth)
        .filter(|(p, _)| **p)
        .fold((0usize, 0usize), |(tp, n), (_, t)| (tp + *t as usize, n + 1));
    (positives > 0).then(|| tp as f64 / positives as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPrecision {
    pub name: String,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    /// Joint precision the models would reach if they were independent.
    pub theoretical_joint: f64,
    /// Measured precision of the unanimous-positive vote; 0 when undefined.
    pub empirical_joint: f64,
    pub empirical_defined: bool,
    /// Fraction of samples where every model votes positive.
    pub coverage: f64,
    /// `empirical_joint − theoretical_joint`.
    pub independence_gap: f64,
    pub models: Vec<ModelPrecision>,
}

/// Combines models by unanimous positive vote and compares the measured
/// precision with the independence benchmark. Disagreements abstain.
pub fn unanimous_combine(reports: &[ModelReport], truth: &[bool]) -> Result<FusionReport> {
    if reports.len() < 2 {
        return Err(Error::domain(format!(
            "need at least two models, got {}",
            reports.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("ground truth".into()));
    }
    for r in reports {
        if r.predictions.len() != truth.len() {
            return Err(Error::Alignment(format!(
                "model `{}` has {} predictions for {} labels",
                r.name,
                r.predictions.len(),
                truth.len()
            )));
        }
    }

    let models = reports
        .iter()
        .map(|r| {
            precision_of(&r.predictions, truth)
                .map(|precision| ModelPrecision {
                    name: r.name.clone(),
                    precision,
                })
                .ok_or_else(|| Error::domain(format!("model `{}` never predicts positive", r.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let precisions: Vec<f64> = models.iter().map(|m| m.precision).collect();
    let theoretical_joint = joint_precision_all(&precisions)?;

    let combined: Vec<bool> = (0..truth.len())
        .map(|i| reports.iter().all(|r| r.predictions[i]))
        .collect();
    let unanimous = combined.iter().filter(|c| **c).count();
    let empirical = precision_of(&combined, truth);
    let empirical_joint = empirical.unwrap_or(0.0);
    Ok(FusionReport {
        theoretical_joint,
        empirical_joint,
        empirical_defined: empirical.is_some(),
        coverage: unanimous as f64 / truth.len() as f64,
        independence_gap: empirical_joint - theoretical_joint,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Posterior of "truth positive" given two independent positive signals,
    /// by summing over the four joint outcomes of the two signals.
    fn bayes_two_signals(p1: f64, p2: f64) -> f64 {
        // balanced prior; a positive signal fires with P(pos|y) chosen so
        // that P(y=1|pos) equals the model precision
        let prior = 0.5;
        let fire = |p: f64, y: bool| if y { p } else { 1.0 - p };
        let mut joint_pos = [0.0; 2];
        for y in [false, true] {
            let py = if y { prior } else { 1.0 - prior };
            for s1 in [false, true] {
                for s2 in [false, true] {
                    let l1 = if s1 { fire(p1, y) } else { 1.0 - fire(p1, y) };
                    let l2 = if s2 { fire(p2, y) } else { 1.0 - fire(p2, y) };
                    if s1 && s2 {
                        joint_pos[y as usize] += py * l1 * l2;
                    }
                }
            }
        }
        joint_pos[1] / (joint_pos[0] + joint_pos[1])
    }

    #[test]
    fn worked_example() {
        let p = joint_precision(0.56, 0.59).unwrap();
        assert!((p - 0.647).abs() <= 5e-4, "{p}");
    }

    #[test]
    fn matches_bayes_enumeration() {
        let oracle = bayes_two_signals(0.7, 0.7);
        assert!((oracle - 0.844_827_586_206_896_6).abs() < 1e-12);
        assert!((joint_precision(0.7, 0.7).unwrap() - oracle).abs() < 1e-15);
        for &(a, b) in &[(0.56, 0.59), (0.51, 0.93), (0.2, 0.35)] {
            assert!((joint_precision(a, b).unwrap() - bayes_two_signals(a, b)).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(joint_precision(0.0, 0.5).is_err());
        assert!(joint_precision(0.5, 1.0).is_err());
        assert!(joint_precision(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn fold_is_order_independent() {
        let ps = [0.5577, 0.5956, 0.6032, 0.5714];
        let forward = joint_precision_all(&ps).unwrap();
        let mut rev = ps;
        rev.reverse();
        assert!((forward - joint_precision_all(&rev).unwrap()).abs() < 1e-14);
        assert!(forward > 0.6032);
    }

    #[test]
    fn perfectly_correlated_models() {
        // 1000 samples, 539 true positives among 1000 positive calls
        let truth: Vec<bool> = (0..2000).map(|i| i < 539 || (1000..1500).contains(&i)).collect();
        let preds: Vec<bool> = (0..2000).map(|i| i < 1000).collect();
        let a = ModelReport::new("nn", preds.clone());
        let b = ModelReport::new("cnn", preds);
        let r = unanimous_combine(&[a, b], &truth).unwrap();
        assert!((r.empirical_joint - 0.539).abs() < 1e-12);
        assert!((r.theoretical_joint - 0.578).abs() < 5e-4);
        assert!(r.independence_gap < 0.0);
        assert_eq!(r.coverage, 0.5);
    }

    #[test]
    fn independent_models_reach_the_formula() {
        let mut rng = crate::rng::seeded(2024);
        let n = 100_000;
        let (p1, p2) = (0.56, 0.59);
        let mut truth = Vec::with_capacity(n);
        let mut m1 = Vec::with_capacity(n);
        let mut m2 = Vec::with_capacity(n);
        for _ in 0..n {
            let y = rng.random::<f64>() < 0.5;
            let fire = |p: f64, u: f64| if y { u < p } else { u < 1.0 - p };
            m1.push(fire(p1, rng.random()));
            m2.push(fire(p2, rng.random()));
            truth.push(y);
        }
        let r = unanimous_combine(
            &[ModelReport::new("a", m1), ModelReport::new("b", m2)],
            &truth,
        )
        .unwrap();
        assert!((r.empirical_joint - 0.647).abs() <= 0.02, "{}", r.empirical_joint);
        assert!((r.models[0].precision - p1).abs() < 0.01);
    }

    #[test]
    fn complementary_models_never_agree() {
        let truth = vec![true, false, true, false];
        let a = ModelReport::new("a", vec![true, true, false, false]);
        let b = ModelReport::new("b", vec![false, false, true, true]);
        let r = unanimous_combine(&[a, b], &truth).unwrap();
        assert_eq!(r.coverage, 0.0);
        assert!(!r.empirical_defined);
        assert_eq!(r.empirical_joint, 0.0);
    }

    #[test]
    fn misaligned_inputs_rejected() {
        let a = ModelReport::new("a", vec![true, false]);
        let b = ModelReport::new("b", vec![true]);
        assert!(matches!(
            unanimous_combine(&[a.clone(), b], &[true, false]),
            Err(Error::Alignment(_))
        ));
        assert!(unanimous_combine(&[a], &[true, false]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            prop_assert_eq!(joint_precision(a, b).unwrap(), joint_precision(b, a).unwrap());
        }

        #[test]
        fn increasing(a in 0.01f64..0.98, b in 0.01f64..0.99, d in 1e-4f64..0.01) {
            prop_assert!(joint_precision(a + d, b).unwrap() > joint_precision(a, b).unwrap());
        }

        #[test]
        fn half_is_neutral(a in 0.001f64..0.999) {
            prop_assert!((joint_precision(a, 0.5).unwrap() - a).abs() <= 1e-15);
        }

        #[test]
        fn agreement_boosts(a in 0.501f64..0.999, b in 0.501f64..0.999) {
            prop_assert!(joint_precision(a, b).unwrap() > a.max(b));
        }

        #[test]
        fn self_combination_is_idempotent(
            preds in proptest::collection::vec(any::<bool>(), 20..60),
            seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::seeded(seed);
            let truth: Vec<bool> = preds.iter().map(|_| rng.random()).collect();
            let mut preds = preds;
            preds[0] = true;
            let own = precision_of(&preds, &truth).unwrap();
            prop_assume!(own > 0.0 && own < 1.0);
            let m = ModelReport::new("m", preds);
            let r = unanimous_combine(&[m.clone(), m], &truth).unwrap();
            prop_assert_eq!(r.empirical_joint, own);
        }
    }
}
