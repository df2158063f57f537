//! Two-layer LSTM trend classifier, written out by hand.
//!
//! Each layer runs the standard cell over the ten days of a window:
//!
//! ```text
//! i = σ(Wᵢx + Uᵢh + bᵢ)    f = σ(W_f x + U_f h + b_f)
//! o = σ(Wₒx + Uₒh + bₒ)    g = tanh(W_g x + U_g h + b_g)
//! c' = f⊙c + i⊙g           h' = o⊙tanh(c')
//! ```
//!
//! The second layer reads the hidden states of the first, and a dense sigmoid
//! head maps the last hidden state of the second layer to the probability
//! that the option mid rises on the following day. Gradients are exact
//! (backpropagation through all ten steps) and are audited against centred
//! finite differences in the tests.
//!
//! The four gate blocks are stacked row-wise in the order
//! input, forget, output, candidate, so every weight matrix has `4H` rows.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{FeatureVector, SequenceSample, Standardizer, N_FEATURES, WINDOW};
use crate::rng;

/// Number of stacked LSTM layers.
pub const LAYERS: usize = 2;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-12;

/// Decision threshold on the predicted probability.
pub const THRESHOLD: f64 = 0.5;

const CHECKPOINT_FORMAT: u32 = 1;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `y += A x`
    fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out += self.row(r).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `y += Aᵀ v`
    fn mul_t_add(&self, v: &[f64], y: &mut [f64]) {
        for (r, &vr) in v.iter().enumerate() {
            if vr != 0.0 {
                for (out, a) in y.iter_mut().zip(self.row(r)) {
                    *out += vr * a;
                }
            }
        }
    }

    /// `A += u vᵀ`
    fn outer_add(&mut self, u: &[f64], v: &[f64]) {
        for (r, &ur) in u.iter().enumerate() {
            if ur != 0.0 {
                let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
                for (a, b) in row.iter_mut().zip(v) {
                    *a += ur * b;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    /// Input-to-hidden weights, `4H × input`.
    pub w_x: Matrix,
    /// Hidden-to-hidden weights, `4H × H`.
    pub w_h: Matrix,
    /// Gate biases, `4H`.
    pub bias: Vec<f64>,
}

impl LstmLayer {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Matrix::zeros(4 * hidden, input),
            w_h: Matrix::zeros(4 * hidden, hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    pub layers: Vec<LstmLayer>,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            layers: vec![LstmLayer::zeros(input, hidden), LstmLayer::zeros(hidden, hidden)],
            head_w: vec![0.0; hidden],
            head_b: 0.0,
        }
    }

    /// Uniform `±1/√fan_in` weights, with the forget-gate biases set to +1.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut params = Self::zeros(input, hidden);
        let mut rng = rng::seeded(seed);
        for layer in &mut params.layers {
            let bound = 1.0 / ((layer.w_x.cols + hidden) as f64).sqrt();
            for v in layer
                .w_x
                .data
                .iter_mut()
                .chain(layer.w_h.data.iter_mut())
                .chain(layer.bias.iter_mut())
            {
                *v = rng.random_range(-bound..bound);
            }
            layer.bias[hidden..2 * hidden].fill(1.0);
        }
        let bound = 1.0 / (hidden as f64).sqrt();
        for v in params.head_w.iter_mut().chain(std::iter::once(&mut params.head_b)) {
            *v = rng.random_range(-bound..bound);
        }
        params
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input, self.hidden)
    }

    /// Checks every shape against `input` and `hidden` and that all values are finite.
    pub fn validate(&self) -> Result<()> {
        let h = self.hidden;
        if h == 0 || self.input == 0 {
            return Err(Error::Dimension("input and hidden sizes must be positive".into()));
        }
        if self.layers.len() != LAYERS {
            return Err(Error::Dimension(format!(
                "expected {LAYERS} layers, found {}",
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { self.input } else { h };
            let ok = layer.w_x.rows == 4 * h
                && layer.w_x.cols == input
                && layer.w_x.data.len() == 4 * h * input
                && layer.w_h.rows == 4 * h
                && layer.w_h.cols == h
                && layer.w_h.data.len() == 4 * h * h
                && layer.bias.len() == 4 * h;
            if !ok {
                return Err(Error::Dimension(format!(
                    "layer {} shapes do not match input {input}, hidden {h}",
                    l + 1
                )));
            }
        }
        if self.head_w.len() != h {
            return Err(Error::Dimension(format!(
                "head has {} weights for hidden size {h}",
                self.head_w.len()
            )));
        }
        if self.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::domain("parameters contain non-finite values"));
        }
        Ok(())
    }

    /// Every parameter tensor in a fixed order; the head bias comes last.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(3 * LAYERS + 2);
        for layer in &self.layers {
            out.push(layer.w_x.data.as_slice());
            out.push(layer.w_h.data.as_slice());
            out.push(layer.bias.as_slice());
        }
        out.push(self.head_w.as_slice());
        out.push(std::slice::from_ref(&self.head_b));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(3 * LAYERS + 2);
        for layer in &mut self.layers {
            out.push(layer.w_x.data.as_mut_slice());
            out.push(layer.w_h.data.as_mut_slice());
            out.push(layer.bias.as_mut_slice());
        }
        out.push(self.head_w.as_mut_slice());
        out.push(std::slice::from_mut(&mut self.head_b));
        out
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.slices().into_iter().flatten()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.slices_mut().into_iter().flatten()
    }

    pub fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// `self += a · other`
    pub fn add_scaled(&mut self, a: f64, other: &LstmParams) {
        for (x, y) in self.values_mut().zip(other.values()) {
            *x += a * y;
        }
    }

    /// FNV-1a over the shapes and the bit patterns of every value.
    fn fingerprint(&self) -> u64 {
        let mix = |h: u64, v: u64| (h ^ v).wrapping_mul(0x0000_0100_0000_01b3);
        let h = mix(mix(0xcbf2_9ce4_8422_2325, self.input as u64), self.hidden as u64);
        self.values().fold(h, |h, v| mix(h, v.to_bits()))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Activations of one layer over a window. `cs` and `hs` carry the zero
/// initial state at index 0.
#[derive(Debug, Clone)]
struct LayerTrace {
    xs: Vec<Vec<f64>>,
    gates: Vec<Vec<f64>>,
    cs: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
}

/// Everything [`backward`] needs, tagged with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    input: usize,
    hidden: usize,
    layers: Vec<LayerTrace>,
    pub logit: f64,
    pub prob: f64,
}

fn layer_forward(layer: &LstmLayer, hidden: usize, xs: Vec<Vec<f64>>) -> LayerTrace {
    let h = hidden;
    let mut trace = LayerTrace {
        gates: Vec::with_capacity(xs.len()),
        cs: vec![vec![0.0; h]],
        hs: vec![vec![0.0; h]],
        xs,
    };
    for t in 0..trace.xs.len() {
        let mut z = layer.bias.clone();
        layer.w_x.mul_add(&trace.xs[t], &mut z);
        layer.w_h.mul_add(&trace.hs[t], &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if k < 3 * h { sigmoid(*v) } else { v.tanh() };
        }
        let c_prev = &trace.cs[t];
        let c: Vec<f64> = (0..h)
            .map(|u| z[h + u] * c_prev[u] + z[u] * z[3 * h + u])
            .collect();
        let hn: Vec<f64> = (0..h).map(|u| z[2 * h + u] * c[u].tanh()).collect();
        trace.gates.push(z);
        trace.cs.push(c);
        trace.hs.push(hn);
    }
    trace
}

/// Runs the network over one window of [`WINDOW`] feature rows.
pub fn forward<W: AsRef<[f64]>>(params: &LstmParams, window: &[W]) -> Result<ForwardCache> {
    if window.len() != WINDOW {
        return Err(Error::Dimension(format!(
            "window has {} steps, expected {WINDOW}",
            window.len()
        )));
    }
    if let Some(bad) = window.iter().find(|w| w.as_ref().len() != params.input) {
        return Err(Error::Dimension(format!(
            "feature row has width {}, expected {}",
            bad.as_ref().len(),
            params.input
        )));
    }
    let xs = window.iter().map(|w| w.as_ref().to_vec()).collect();
    let first = layer_forward(&params.layers[0], params.hidden, xs);
    let second = layer_forward(&params.layers[1], params.hidden, first.hs[1..].to_vec());
    let last = second.hs.last().expect("non-empty window");
    let logit = params.head_b + params.head_w.iter().zip(last).map(|(a, b)| a * b).sum::<f64>();
    Ok(ForwardCache {
        fingerprint: params.fingerprint(),
        input: params.input,
        hidden: params.hidden,
        layers: vec![first, second],
        logit,
        prob: sigmoid(logit),
    })
}

/// Binary cross-entropy of a probability against a label.
pub fn loss(prob: f64, label: bool) -> f64 {
    let p = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Backpropagates `dh_ext` (the gradient flowing into each `h_t` from
/// above) through one layer; returns the gradient with respect to its inputs.
fn layer_backward(layer: &LstmLayer, trace: &LayerTrace, dh_ext: &[Vec<f64>], grad: &mut LstmLayer) -> Vec<Vec<f64>> {
    let h = layer.w_h.cols;
    let steps = trace.xs.len();
    let mut dxs = vec![vec![0.0; layer.w_x.cols]; steps];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..steps).rev() {
        let g = &trace.gates[t];
        let (c, c_prev) = (&trace.cs[t + 1], &trace.cs[t]);
        for u in 0..h {
            let dh = dh_ext[t][u] + dh_next[u];
            let tc = c[u].tanh();
            let (i, f, o, cand) = (g[u], g[h + u], g[2 * h + u], g[3 * h + u]);
            let dc = dc_next[u] + dh * o * (1.0 - tc * tc);
            dz[u] = dc * cand * i * (1.0 - i);
            dz[h + u] = dc * c_prev[u] * f * (1.0 - f);
            dz[2 * h + u] = dh * tc * o * (1.0 - o);
            dz[3 * h + u] = dc * i * (1.0 - cand * cand);
            dc_next[u] = dc * f;
        }
        grad.w_x.outer_add(&dz, &trace.xs[t]);
        grad.w_h.outer_add(&dz, &trace.hs[t]);
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        layer.w_x.mul_t_add(&dz, &mut dxs[t]);
        dh_next.fill(0.0);
        layer.w_h.mul_t_add(&dz, &mut dh_next);
    }
    dxs
}

/// Exact gradient of [`loss`] with respect to every parameter.
///
/// Fails if `cache` was produced by different parameters.
pub fn backward(params: &LstmParams, cache: &ForwardCache, label: bool) -> Result<LstmParams> {
    if cache.input != params.input || cache.hidden != params.hidden || cache.layers.len() != LAYERS {
        return Err(Error::Dimension("cache shape does not match the parameters".into()));
    }
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::Dimension(
            "stale cache: parameters changed since the forward pass".into(),
        ));
    }
    let mut grad = params.zeros_like();
    // d(loss)/d(logit); zero where the clamp is active
    let p = cache.prob;
    let dlogit = if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        p - label as u8 as f64
    } else {
        0.0
    };
    let top = &cache.layers[1];
    let last = top.hs.last().expect("non-empty window");
    for (g, hv) in grad.head_w.iter_mut().zip(last) {
        *g = dlogit * hv;
    }
    grad.head_b = dlogit;

    let steps = top.xs.len();
    let mut dh_top = vec![vec![0.0; params.hidden]; steps];
    dh_top[steps - 1] = params.head_w.iter().map(|w| w * dlogit).collect();
    let (g0, g1) = grad.layers.split_at_mut(1);
    let dh_first = layer_backward(&params.layers[1], top, &dh_top, &mut g1[0]);
    layer_backward(&params.layers[0], &cache.layers[0], &dh_first, &mut g0[0]);
    Ok(grad)
}

/// Loss and gradient of one sample.
pub fn sample_gradient<W: AsRef<[f64]>>(params: &LstmParams, window: &[W], label: bool) -> Result<(f64, LstmParams)> {
    let cache = forward(params, window)?;
    let grad = backward(params, &cache, label)?;
    Ok((loss(cache.prob, label), grad))
}

/// Summed loss and summed gradient over a batch.
pub fn batch_gradient(params: &LstmParams, batch: &[&SequenceSample]) -> Result<(f64, LstmParams)> {
    let mut total = params.zeros_like();
    let mut loss_sum = 0.0;
    for sample in batch {
        let (l, g) = sample_gradient(params, &sample.window, sample.label)?;
        loss_sum += l;
        total.add_scaled(1.0, &g);
    }
    Ok((loss_sum, total))
}

pub fn predict<W: AsRef<[f64]>>(params: &LstmParams, window: &[W]) -> Result<f64> {
    Ok(forward(params, window)?.prob)
}

pub fn predict_batch(params: &LstmParams, windows: &[Vec<FeatureVector>]) -> Result<Vec<f64>> {
    windows.iter().map(|w| predict(params, w)).collect()
}

/// Confusion counts and the ratios derived from them.
///
/// Undefined precision or recall (no predicted or no actual positives) is
/// reported as 0 with the matching `*_defined` flag cleared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let total = tp + fp + tn + fn_;
        let ratio = |num: usize, den: usize| if den > 0 { num as f64 / den as f64 } else { 0.0 };
        Self {
            accuracy: ratio(tp + tn, total),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            tp,
            fp,
            tn,
            fn_,
            precision_defined: tp + fp > 0,
            recall_defined: tp + fn_ > 0,
        }
    }

    pub fn from_predictions(predicted: &[bool], truth: &[bool]) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        Self::from_counts(tp, fp, tn, fn_)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Metrics at the 0.5 threshold, on windows used as given.
pub fn evaluate(params: &LstmParams, data: &[SequenceSample]) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data".into()));
    }
    let mut predicted = Vec::with_capacity(data.len());
    for s in data {
        predicted.push(predict(params, &s.window)? >= THRESHOLD);
    }
    let truth: Vec<bool> = data.iter().map(|s| s.label).collect();
    Ok(Metrics::from_predictions(&predicted, &truth))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain mini-batch gradient descent.
    #[default]
    Sgd,
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Leading share of the samples used for training; the rest validates.
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            batch: 8,
            epochs: 30,
            learning_rate: 0.05,
            seed: 0,
            train_fraction: 0.8,
            validation_fraction: 0.2,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, message: &str| {
            Err(Error::Config {
                field,
                message: message.into(),
            })
        };
        if self.hidden == 0 {
            return bad("hidden", "must be positive");
        }
        if self.batch == 0 {
            return bad("batch", "must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive and finite");
        }
        for (field, f) in [
            ("train_fraction", self.train_fraction),
            ("validation_fraction", self.validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return bad(field, "must lie strictly between 0 and 1");
            }
        }
        if (self.train_fraction + self.validation_fraction - 1.0).abs() > 1e-9 {
            return bad("validation_fraction", "must sum to 1 with train_fraction");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's updates.
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation: Metrics,
}

/// Parameters with the best validation accuracy, plus what is needed to
/// apply them to raw windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub params: LstmParams,
    pub standardizer: Standardizer,
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) the parameters were taken from.
    pub best_epoch: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: u32,
    config: TrainConfig,
    shapes: Shapes,
    seed: u64,
    epoch: usize,
    params: LstmParams,
    standardizer: Standardizer,
    history: Vec<EpochRecord>,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct Shapes {
    input: usize,
    hidden: usize,
    layers: usize,
}

impl TrainedModel {
    /// Probability of an up move for a raw (unstandardized) window.
    pub fn predict(&self, window: &[FeatureVector]) -> Result<f64> {
        predict(&self.params, &self.standardizer.apply_window(window))
    }

    pub fn evaluate(&self, data: &[SequenceSample]) -> Result<Metrics> {
        evaluate(&self.params, &standardize(&self.standardizer, data))
    }

    pub fn to_json(&self) -> Result<String> {
        let checkpoint = Checkpoint {
            format: CHECKPOINT_FORMAT,
            config: self.config.clone(),
            shapes: Shapes {
                input: self.params.input,
                hidden: self.params.hidden,
                layers: self.params.layers.len(),
            },
            seed: self.config.seed,
            epoch: self.best_epoch,
            params: self.params.clone(),
            standardizer: self.standardizer.clone(),
            history: self.history.clone(),
        };
        Ok(serde_json::to_string_pretty(&checkpoint)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::domain(format!("unsupported checkpoint format {}", c.format)));
        }
        let declared = Shapes {
            input: c.params.input,
            hidden: c.params.hidden,
            layers: c.params.layers.len(),
        };
        if c.shapes != declared || c.config.hidden != c.params.hidden {
            return Err(Error::Dimension("checkpoint shapes disagree with its weights".into()));
        }
        c.params.validate()?;
        if c.standardizer.mean.len() != c.params.input || c.standardizer.std.len() != c.params.input {
            return Err(Error::Dimension("standardizer width disagrees with the input size".into()));
        }
        Ok(Self {
            config: c.config,
            params: c.params,
            standardizer: c.standardizer,
            history: c.history,
            best_epoch: c.epoch,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn standardize(z: &Standardizer, data: &[SequenceSample]) -> Vec<SequenceSample> {
    data.iter()
        .map(|s| SequenceSample {
            window: z.apply_window(&s.window),
            label: s.label,
            end: s.end,
        })
        .collect()
}

fn mean_loss(params: &LstmParams, data: &[SequenceSample]) -> Result<f64> {
    let mut sum = 0.0;
    for s in data {
        sum += loss(predict(params, &s.window)?, s.label);
    }
    Ok(sum / data.len() as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Mini-batch training.
///
/// The first `train_fraction` of `data` (in the given order) trains, the
/// rest validates; features are standardized with statistics of the
/// training part only. Batches are drawn from a per-epoch shuffle seeded
/// from `config.seed`, so a fixed seed fixes the whole run.
pub fn train(data: &[SequenceSample], config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data".into()));
    }
    if data.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: data.len(),
        });
    }
    let n_train = ((data.len() as f64 * config.train_fraction).round() as usize).clamp(1, data.len() - 1);
    if config.batch > n_train {
        return Err(Error::Config {
            field: "batch",
            message: format!("{} exceeds the {n_train} training samples", config.batch),
        });
    }
    let input = data[0].window.first().map_or(0, |f| f.0.len());
    debug_assert_eq!(input, N_FEATURES);

    let standardizer = Standardizer::fit(&data[..n_train])?;
    let train_set = standardize(&standardizer, &data[..n_train]);
    let val_set = standardize(&standardizer, &data[n_train..]);

    let mut params = LstmParams::init(input, config.hidden, rng::derive_seed(config.seed, "lstm-init"));
    let mut shuffle = rng::seeded(rng::derive_seed(config.seed, "lstm-shuffle"));
    let mut adam = Adam {
        m: vec![0.0; params.n_params()],
        v: vec![0.0; params.n_params()],
        t: 0,
    };
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, LstmParams)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch) {
            let batch: Vec<&SequenceSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (l, grad) = batch_gradient(&params, &batch)?;
            if !l.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += l;
            let scale = 1.0 / chunk.len() as f64;
            match config.optimizer {
                Optimizer::Sgd => params.add_scaled(-config.learning_rate * scale, &grad),
                Optimizer::Adam => {
                    const B1: f64 = 0.9;
                    const B2: f64 = 0.999;
                    adam.t += 1;
                    let (c1, c2) = (1.0 - B1.powi(adam.t), 1.0 - B2.powi(adam.t));
                    let state = adam.m.iter_mut().zip(adam.v.iter_mut());
                    for ((p, g), (m, v)) in params.values_mut().zip(grad.values()).zip(state) {
                        let g = g * scale;
                        *m = B1 * *m + (1.0 - B1) * g;
                        *v = B2 * *v + (1.0 - B2) * g * g;
                        *p -= config.learning_rate * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
                    }
                }
            }
        }
        if params.values().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        let validation_loss = mean_loss(&params, &val_set)?;
        if !validation_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let validation = evaluate(&params, &val_set)?;
        if best.as_ref().is_none_or(|(acc, _, _)| validation.accuracy > *acc) {
            best = Some((validation.accuracy, epoch, params.clone()));
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_train as f64,
            validation_loss,
            validation,
        });
    }

    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainedModel {
        config: config.clone(),
        params,
        standardizer,
        history,
        best_epoch,
    })
}

/// Feature whose window mean decides the label of [`separable_dataset`].
pub const SEPARABLE_FEATURE: usize = 10;

/// Windows of independent standard normals labelled by the sign of the
/// window mean of feature [`SEPARABLE_FEATURE`]; a threshold on that one
/// aggregate separates the classes perfectly.
pub fn separable_dataset(n: usize, seed: u64) -> Vec<SequenceSample> {
    let mut rng = rng::seeded(seed);
    (0..n)
        .map(|end| {
            let window: Vec<FeatureVector> = (0..WINDOW)
                .map(|_| FeatureVector(std::array::from_fn(|_| rng.sample(StandardNormal))))
                .collect();
            let sum: f64 = window.iter().map(|f| f.0[SEPARABLE_FEATURE]).sum();
            SequenceSample {
                window,
                label: sum > 0.0,
                end,
            }
        })
        .collect()
}

/// Shuffles the labels across samples, destroying any input–label relation
/// while keeping the class balance.
pub fn permute_labels(samples: &[SequenceSample], seed: u64) -> Vec<SequenceSample> {
    let mut labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
    labels.shuffle(&mut rng::seeded(seed));
    samples
        .iter()
        .zip(labels)
        .map(|(s, label)| SequenceSample { label, ..s.clone() })
        .collect()
}
