// SPDX-License-Identifier: MIT OR Apache-2.0

//! A small dense ReLU network with a log-softmax head.
//!
//! The network is the scalar function every attribution method in this crate
//! explains. Besides evaluation it provides exact input gradients (reverse
//! mode), Hessian-vector products (forward-over-reverse with the ReLU pattern
//! held fixed) and a deterministic minibatch trainer.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`. All arithmetic
//! is `f64`; evaluation is a pure function of the weights and the input.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, GigError, Result};

/// The quantity of class `class_index` that attributions decompose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSpace {
    Probability,
    LogProbability,
    Logit,
}

/// Selects the scalar `f: R^d -> R` read off the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScalarTarget {
    pub class_index: usize,
    pub space: OutputSpace,
}

impl ScalarTarget {
    pub fn probability(class_index: usize) -> Self {
        Self {
            class_index,
            space: OutputSpace::Probability,
        }
    }

    pub fn log_probability(class_index: usize) -> Self {
        Self {
            class_index,
            space: OutputSpace::LogProbability,
        }
    }

    pub fn logit(class_index: usize) -> Self {
        Self {
            class_index,
            space: OutputSpace::Logit,
        }
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(GigError::Argument("layer dimensions must be positive".into()));
        }
        check_dim(in_dim * out_dim, weights.len())?;
        check_dim(out_dim, bias.len())?;
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(GigError::Argument("layer parameters must be finite".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.in_dim..(r + 1) * self.in_dim]
    }

    /// `W x + b`, or `W x` when `with_bias` is false.
    fn apply(&self, x: &[f64], with_bias: bool) -> Vec<f64> {
        (0..self.out_dim)
            .map(|r| {
                let dot: f64 = self.row(r).iter().zip(x).map(|(w, v)| w * v).sum();
                if with_bias {
                    dot + self.bias[r]
                } else {
                    dot
                }
            })
            .collect()
    }

    /// `W^T g`.
    fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * gr;
            }
        }
        out
    }
}

/// Intermediate values of one forward pass.
struct Trace {
    /// Input of every layer; `inputs[0]` is `x`, `inputs[l]` is the ReLU output of layer `l - 1`.
    inputs: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl Trace {
    fn relu_active(&self, layer: usize, unit: usize) -> bool {
        self.inputs[layer][unit] > 0.0
    }
}

/// Feed-forward classifier: ReLU hidden layers, log-softmax over the last layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

impl MlpModel {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(GigError::Argument("model needs at least one layer".into()));
        };
        if last.out_dim < 2 {
            return Err(GigError::Argument(format!(
                "model needs at least 2 classes, got {}",
                last.out_dim
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(GigError::Argument(format!(
                    "layer shapes do not chain: {} outputs feed {} inputs",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        Ok(Self { layers })
    }

    /// He-normal initialization with zero biases; `sizes = [d, h1, ..., c]`.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(GigError::Argument("need at least input and output sizes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                    .map_err(|e| GigError::Argument(e.to_string()))?;
                let weights = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
                Dense::new(fan_in, fan_out, weights, vec![0.0; fan_out])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(GigError::Argument("need at least input and output sizes".into()));
        }
        Self::new(sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect())
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Layer widths `[d, h1, ..., c]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    fn check_target(&self, target: &ScalarTarget) -> Result<()> {
        if target.class_index < self.num_classes() {
            Ok(())
        } else {
            Err(GigError::Target {
                class: target.class_index,
                classes: self.num_classes(),
            })
        }
    }

    fn trace(&self, x: &[f64]) -> Result<Trace> {
        check_dim(self.input_dim(), x.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let mut z = layer.apply(&h, true);
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            inputs.push(std::mem::replace(&mut h, z));
        }
        let logits = self.layers[last].apply(&h, true);
        inputs.push(h);
        Ok(Trace { inputs, logits })
    }

    /// Pulls a logit-space covector back to input space through the ReLU pattern of `trace`.
    fn pull_back(&self, trace: &Trace, dlogits: Vec<f64>) -> Vec<f64> {
        let mut g = dlogits;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            g = layer.apply_transpose(&g);
            if l > 0 {
                for (u, gu) in g.iter_mut().enumerate() {
                    if !trace.relu_active(l, u) {
                        *gu = 0.0;
                    }
                }
            }
        }
        g
    }

    /// Pushes an input-space direction forward to logit space (Jacobian-vector product).
    fn push_forward(&self, trace: &Trace, v: &[f64]) -> Vec<f64> {
        let mut dh = v.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut dz = layer.apply(&dh, false);
            if l < last {
                for (u, d) in dz.iter_mut().enumerate() {
                    if !trace.relu_active(l + 1, u) {
                        *d = 0.0;
                    }
                }
            }
            dh = dz;
        }
        dh
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.logits)
    }

    /// Log-probabilities over classes.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(log_softmax(&self.trace(x)?.logits))
    }

    /// Index of the most probable class; ties resolve to the lower index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.trace(x)?.logits))
    }

    pub fn scalar_output(&self, x: &[f64], target: &ScalarTarget) -> Result<f64> {
        self.check_target(target)?;
        let logits = self.trace(x)?.logits;
        Ok(scalar_from_logits(&logits, target))
    }

    pub fn input_gradient(&self, x: &[f64], target: &ScalarTarget) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(x, target)?.1)
    }

    /// `f(x)` and `grad f(x)` from a single forward pass. ReLU'(0) = 0.
    pub fn value_and_gradient(&self, x: &[f64], target: &ScalarTarget) -> Result<(f64, Vec<f64>)> {
        self.check_target(target)?;
        let trace = self.trace(x)?;
        let value = scalar_from_logits(&trace.logits, target);
        let dlogits = output_gradient(&trace.logits, target);
        Ok((value, self.pull_back(&trace, dlogits)))
    }

    /// `H(x) v` where `H` is the Hessian of the scalar target, with the ReLU
    /// activation pattern at `x` held fixed.
    pub fn hessian_vector_product(
        &self,
        x: &[f64],
        target: &ScalarTarget,
        v: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_target(target)?;
        check_dim(self.input_dim(), v.len())?;
        let trace = self.trace(x)?;
        let jv = self.push_forward(&trace, v);
        let u = output_hessian_product(&trace.logits, target, &jv);
        Ok(self.pull_back(&trace, u))
    }

    /// Returns `(||grad f(x)||, grad ||grad f||(x))`.
    ///
    /// The gradient of the norm is `H grad f / ||grad f||` and is zero where
    /// `grad f` vanishes.
    pub fn gradient_norm_and_gradient(
        &self,
        x: &[f64],
        target: &ScalarTarget,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_target(target)?;
        let trace = self.trace(x)?;
        let grad = self.pull_back(&trace, output_gradient(&trace.logits, target));
        let norm = l2_norm(&grad);
        if norm == 0.0 {
            return Ok((0.0, vec![0.0; grad.len()]));
        }
        let jv = self.push_forward(&trace, &grad);
        let u = output_hessian_product(&trace.logits, target, &jv);
        let mut hg = self.pull_back(&trace, u);
        hg.iter_mut().for_each(|h| *h /= norm);
        Ok((norm, hg))
    }

    /// Distance of `x` to the nearest ReLU kink, measured in input space
    /// (`|z_u| / ||dz_u/dx||` minimized over hidden units).
    pub fn kink_distance(&self, x: &[f64]) -> Result<f64> {
        let trace = self.trace(x)?;
        let d = self.input_dim();
        let mut best = f64::INFINITY;
        // Jacobian of each hidden layer's pre-activations, columns per input coordinate.
        let mut jac: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (l, layer) in self.layers[..last].iter().enumerate() {
            let z = layer.apply(&h, true);
            let dz: Vec<Vec<f64>> = jac.iter().map(|col| layer.apply(col, false)).collect();
            for (u, &zu) in z.iter().enumerate() {
                let slope = dz.iter().map(|col| col[u] * col[u]).sum::<f64>().sqrt();
                if slope > 0.0 {
                    best = best.min(zu.abs() / slope);
                }
            }
            jac = dz
                .into_iter()
                .map(|mut col| {
                    for (u, c) in col.iter_mut().enumerate() {
                        if !trace.relu_active(l + 1, u) {
                            *c = 0.0;
                        }
                    }
                    col
                })
                .collect();
            h = trace.inputs[l + 1].clone();
        }
        Ok(best)
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let top = argmax(logits);
    let m = logits[top];
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != top)
        .map(|(_, z)| (z - m).exp())
        .sum();
    let lse = m + rest.ln_1p();
    logits.iter().map(|z| z - lse).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn scalar_from_logits(logits: &[f64], target: &ScalarTarget) -> f64 {
    let c = target.class_index;
    match target.space {
        OutputSpace::Logit => logits[c],
        OutputSpace::LogProbability => log_softmax(logits)[c],
        OutputSpace::Probability => log_softmax(logits)[c].exp(),
    }
}

fn probabilities(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Gradient of the scalar target with respect to the logits.
fn output_gradient(logits: &[f64], target: &ScalarTarget) -> Vec<f64> {
    let c = target.class_index;
    match target.space {
        OutputSpace::Logit => {
            let mut g = vec![0.0; logits.len()];
            g[c] = 1.0;
            g
        }
        OutputSpace::LogProbability => {
            let mut g: Vec<f64> = probabilities(logits).into_iter().map(|p| -p).collect();
            g[c] += 1.0;
            g
        }
        OutputSpace::Probability => {
            let p = probabilities(logits);
            let pc = p[c];
            p.iter()
                .enumerate()
                .map(|(j, pj)| pc * (f64::from(u8::from(j == c)) - pj))
                .collect()
        }
    }
}

/// Hessian of the scalar target with respect to the logits, applied to `u`.
fn output_hessian_product(logits: &[f64], target: &ScalarTarget, u: &[f64]) -> Vec<f64> {
    let c = target.class_index;
    match target.space {
        OutputSpace::Logit => vec![0.0; logits.len()],
        OutputSpace::LogProbability => {
            let p = probabilities(logits);
            let pu: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
            p.iter().zip(u).map(|(pj, uj)| -pj * (uj - pu)).collect()
        }
        OutputSpace::Probability => {
            // d2 p_c / dz_j dz_k = g_k (e_c - p)_j - p_c p_j (e_jk - p_k), with g = grad p_c.
            let p = probabilities(logits);
            let pc = p[c];
            let pu: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
            let gu: f64 = p
                .iter()
                .zip(u)
                .enumerate()
                .map(|(k, (pk, uk))| pc * (f64::from(u8::from(k == c)) - pk) * uk)
                .sum();
            p.iter()
                .zip(u)
                .enumerate()
                .map(|(j, (pj, uj))| {
                    (f64::from(u8::from(j == c)) - pj) * gu - pc * pj * (uj - pu)
                })
                .collect()
        }
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minibatch SGD with momentum on the mean negative log-likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// L2 penalty on weights (not biases), added to the loss gradient.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 64,
            weight_decay: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub epochs: usize,
}

/// Trains a copy of `model` and returns it with a report.
///
/// Bit-reproducible for a fixed `config.seed`: the only randomness is the
/// per-epoch shuffle, and all reductions run in a fixed order.
pub fn train(
    model: &MlpModel,
    points: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    if points.is_empty() {
        return Err(GigError::Argument("training set is empty".into()));
    }
    check_dim(points.len(), labels.len())?;
    if config.batch_size == 0 {
        return Err(GigError::Argument("batch size must be positive".into()));
    }
    let classes = model.num_classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(GigError::Argument(format!("label {bad} out of range for {classes} classes")));
    }
    for p in points {
        check_dim(model.input_dim(), p.len())?;
    }

    let mut model = model.clone();
    let mut velocity: Vec<(Vec<f64>, Vec<f64>)> = model
        .layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut last_loss = f64::NAN;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads: Vec<(Vec<f64>, Vec<f64>)> = velocity
                .iter()
                .map(|(w, b)| (vec![0.0; w.len()], vec![0.0; b.len()]))
                .collect();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                epoch_loss += accumulate_nll_gradient(&model, &points[i], labels[i], scale, &mut grads);
            }
            for ((layer, (vw, vb)), (gw, gb)) in model.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                for ((w, v), g) in layer.weights.iter_mut().zip(vw.iter_mut()).zip(gw) {
                    *v = config.momentum * *v - config.learning_rate * (g + config.weight_decay * *w);
                    *w += *v;
                }
                for ((b, v), g) in layer.bias.iter_mut().zip(vb.iter_mut()).zip(gb) {
                    *v = config.momentum * *v - config.learning_rate * g;
                    *b += *v;
                }
            }
        }
        last_loss = epoch_loss / points.len() as f64;
        if !last_loss.is_finite() {
            return Err(GigError::Divergence {
                epoch,
                loss: last_loss,
            });
        }
    }

    let correct = points
        .iter()
        .zip(labels)
        .map(|(p, &y)| model.predict(p).map(|pred| usize::from(pred == y)))
        .sum::<Result<usize>>()?;
    let report = TrainReport {
        final_loss: last_loss,
        train_accuracy: correct as f64 / points.len() as f64,
        epochs: config.epochs,
    };
    Ok((model, report))
}

/// Adds `scale * d NLL / d params` for one sample into `grads`; returns the unscaled loss.
fn accumulate_nll_gradient(
    model: &MlpModel,
    x: &[f64],
    label: usize,
    scale: f64,
    grads: &mut [(Vec<f64>, Vec<f64>)],
) -> f64 {
    // Shapes were validated by the caller.
    let trace = model.trace(x).expect("validated input");
    let logp = log_softmax(&trace.logits);
    let loss = -logp[label];
    let mut g: Vec<f64> = logp.iter().map(|lp| lp.exp() * scale).collect();
    g[label] -= scale;
    for (l, layer) in model.layers.iter().enumerate().rev() {
        let input = &trace.inputs[l];
        let (gw, gb) = &mut grads[l];
        for (r, &gr) in g.iter().enumerate() {
            gb[r] += gr;
            if gr != 0.0 {
                for (w, a) in gw[r * layer.in_dim..(r + 1) * layer.in_dim].iter_mut().zip(input) {
                    *w += gr * a;
                }
            }
        }
        if l > 0 {
            let mut down = layer.apply_transpose(&g);
            for (u, d) in down.iter_mut().enumerate() {
                if !trace.relu_active(l, u) {
                    *d = 0.0;
                }
            }
            g = down;
        }
    }
    loss
}

const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk JSON layout of a model. `serde_json` writes shortest round-trip
/// decimals and parses them back exactly, so save/load is bit-exact.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    layer_sizes: Vec<usize>,
    activation: String,
    output: String,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: self.layer_sizes(),
            activation: "relu".into(),
            output: "log_softmax".into(),
            weights: self.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.layers.iter().map(|l| l.bias.clone()).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(GigError::ModelFormat(format!(
                "unsupported format version {}",
                file.format_version
            )));
        }
        if file.activation != "relu" || file.output != "log_softmax" {
            return Err(GigError::ModelFormat(format!(
                "unsupported activation/output '{}'/'{}'",
                file.activation, file.output
            )));
        }
        let n = file.layer_sizes.len();
        if n < 2 || file.weights.len() != n - 1 || file.biases.len() != n - 1 {
            return Err(GigError::ModelFormat("layer count mismatch".into()));
        }
        let layers = file
            .weights
            .into_iter()
            .zip(file.biases)
            .zip(file.layer_sizes.windows(2))
            .map(|((w, b), dims)| Dense::new(dims[0], dims[1], w, b))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| GigError::ModelFormat(e.to_string()))?;
        Self::new(layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
