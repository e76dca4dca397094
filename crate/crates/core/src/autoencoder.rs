//! Non-compressive fully connected autoencoder scored by reconstruction MSE.
//!
//! Hidden layers are at least as wide as the input. Anomaly scores are the
//! mean squared difference between a standardized feature tensor and its
//! reconstruction. Training is plain mini-batch gradient descent with exact
//! backpropagation, single-threaded and fully determined by the seed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::features::{FeatureTensor, Standardizer};
use crate::kernels::{axpy, axpy4, dot, dot4};

/// Negative-side slope of the hidden-layer leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Rows per forward chunk when scoring.
const SCORE_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative from the activated value; the sign survives activation
    /// because the slope is positive.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if y > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Affine layer with `weights` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    /// `out[b][o] = act(bias[o] + W[o] . input[b])` for a row-major batch.
    fn forward_batch(&self, input: &[f64], rows: usize, out: &mut [f64]) {
        let n = self.inputs;
        let x = |b: usize| &input[b * n..(b + 1) * n];
        for o in 0..self.outputs {
            let w = self.row(o);
            let b0 = self.bias[o];
            let mut b = 0;
            while b + 4 <= rows {
                let d = dot4(w, [x(b), x(b + 1), x(b + 2), x(b + 3)]);
                for (k, v) in d.into_iter().enumerate() {
                    out[(b + k) * self.outputs + o] = self.activation.apply(b0 + v);
                }
                b += 4;
            }
            for b in b..rows {
                out[b * self.outputs + o] = self.activation.apply(b0 + dot(w, x(b)));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    layers: Vec<Dense>,
    seed: u64,
}

/// Xavier-uniform initialisation: weights uniform in `[-s, s]` with
/// `s = sqrt(6 / (fan_in + fan_out))`, biases zero.
///
/// `dims` lists every layer width from input to output, for example
/// `[D, D, D, D]` for two hidden layers. The output width must equal the
/// input width and hidden widths may not be narrower than the input. Weights
/// are drawn in layer order, row by row, from ChaCha8 seeded with `seed`.
pub fn init_model(dims: &[usize], seed: u64) -> Result<AutoencoderModel> {
    validate_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let s = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let weights = (0..fan_in * fan_out)
                .map(|_| (2.0 * rng.random::<f64>() - 1.0) * s)
                .collect();
            Dense {
                inputs: fan_in,
                outputs: fan_out,
                weights,
                bias: vec![0.0; fan_out],
                activation: if i == last {
                    Activation::Identity
                } else {
                    Activation::LeakyRelu { slope: LEAKY_SLOPE }
                },
            }
        })
        .collect();
    Ok(AutoencoderModel { layers, seed })
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(invalid("an autoencoder needs at least an input and an output width"));
    }
    if dims.contains(&0) {
        return Err(invalid("layer widths must be positive"));
    }
    let input = dims[0];
    if dims[dims.len() - 1] != input {
        return Err(invalid(format!(
            "output width {} differs from input width {input}",
            dims[dims.len() - 1]
        )));
    }
    if let Some(w) = dims[1..dims.len() - 1].iter().find(|&&w| w < input) {
        return Err(invalid(format!(
            "hidden width {w} is narrower than input width {input}"
        )));
    }
    Ok(())
}

impl AutoencoderModel {
    /// Builds a model from explicit layers, checking the width chain and that
    /// every parameter is finite.
    pub fn from_layers(layers: Vec<Dense>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("model has no layers"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(invalid(format!("layer {i} parameter sizes do not match its widths")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        if let Some(i) = layers.windows(2).position(|w| w[0].outputs != w[1].inputs) {
            return Err(invalid(format!("layer {} output does not feed layer {}", i, i + 1)));
        }
        if layers[0].inputs != layers[layers.len() - 1].outputs {
            return Err(invalid("output width differs from input width"));
        }
        Ok(Self { layers, seed })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access for tests and custom initialisation; callers keep
    /// shapes intact.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    /// Widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Forward pass over `rows` row-major inputs, keeping every layer's
    /// activations (index 0 is the input itself).
    fn forward_cached(&self, input: &[f64], rows: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let mut out = vec![0.0; rows * layer.outputs];
            layer.forward_batch(acts.last().unwrap(), rows, &mut out);
            acts.push(out);
        }
        acts
    }

    /// Overwrites parameters with those of a model of identical shape,
    /// reusing the existing allocations.
    fn copy_parameters_from(&mut self, other: &AutoencoderModel) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.copy_from_slice(&b.weights);
            a.bias.copy_from_slice(&b.bias);
        }
    }

    /// Forward pass of a single flattened input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        Ok(self.forward_cached(x, 1).pop().unwrap())
    }
}

pub fn reconstruct(model: &AutoencoderModel, tensor: &FeatureTensor) -> Result<FeatureTensor> {
    let out = model.forward(&tensor.values)?;
    FeatureTensor::new(out, tensor.frames, tensor.bins, tensor.event_ref)
}

/// Mean over all cells of the squared difference.
pub fn mse_score(x: &FeatureTensor, reconstruction: &FeatureTensor) -> Result<f64> {
    if x.frames != reconstruction.frames || x.bins != reconstruction.bins {
        return Err(Error::ShapeMismatch {
            expected: x.dim(),
            actual: reconstruction.dim(),
        });
    }
    Ok(mse(&x.values, &reconstruction.values))
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Gradients with the same layout as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &AutoencoderModel) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

fn flatten(batch: &[&[f64]], dim: usize) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(batch.len() * dim);
    for x in batch {
        if x.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
        flat.extend_from_slice(x);
    }
    Ok(flat)
}

/// Runs forward and backward over one batch. Returns each sample's
/// reconstruction MSE; `grads` receives the gradient of their mean.
fn backprop(model: &AutoencoderModel, input: &[f64], rows: usize, grads: &mut Gradients) -> Vec<f64> {
    let dim = model.input_dim();
    let acts = model.forward_cached(input, rows);
    let output = acts.last().unwrap();
    let mut losses = Vec::with_capacity(rows);
    // d(mean over batch of mean over cells)/d(output)
    let scale = 2.0 / (dim * rows) as f64;
    let mut delta: Vec<f64> = Vec::with_capacity(rows * dim);
    for b in 0..rows {
        let x = &input[b * dim..(b + 1) * dim];
        let y = &output[b * dim..(b + 1) * dim];
        losses.push(mse(x, y));
        delta.extend(x.iter().zip(y).map(|(xi, yi)| scale * (yi - xi)));
    }
    grads.clear();

    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let out = &acts[l + 1];
        for (d, y) in delta.iter_mut().zip(out) {
            *d *= layer.activation.derivative_from_output(*y);
        }
        let inp = &acts[l];
        let need_input_grad = l > 0;
        let mut d_in = if need_input_grad {
            vec![0.0; rows * layer.inputs]
        } else {
            Vec::new()
        };
        let n = layer.inputs;
        let x = |b: usize| &inp[b * n..(b + 1) * n];
        let gw = &mut grads.weights[l];
        let gb = &mut grads.bias[l];
        // Every gradient element accumulates over samples in order, and
        // every input delta over outputs in order; the blocking below only
        // shares loads between those sums.
        for o in 0..layer.outputs {
            let grow = &mut gw[o * n..(o + 1) * n];
            let d = |b: usize| delta[b * layer.outputs + o];
            for b in 0..rows {
                gb[o] += d(b);
            }
            let mut b = 0;
            while b + 4 <= rows {
                axpy4(
                    [d(b), d(b + 1), d(b + 2), d(b + 3)],
                    [x(b), x(b + 1), x(b + 2), x(b + 3)],
                    grow,
                );
                b += 4;
            }
            for b in b..rows {
                axpy(d(b), x(b), grow);
            }
        }
        if need_input_grad {
            let mut o = 0;
            while o + 4 <= layer.outputs {
                let w = [layer.row(o), layer.row(o + 1), layer.row(o + 2), layer.row(o + 3)];
                for b in 0..rows {
                    let dr = &delta[b * layer.outputs + o..b * layer.outputs + o + 4];
                    axpy4([dr[0], dr[1], dr[2], dr[3]], w, &mut d_in[b * n..(b + 1) * n]);
                }
                o += 4;
            }
            for o in o..layer.outputs {
                for b in 0..rows {
                    axpy(
                        delta[b * layer.outputs + o],
                        layer.row(o),
                        &mut d_in[b * n..(b + 1) * n],
                    );
                }
            }
        }
        delta = d_in;
    }
    losses
}

/// Mean reconstruction MSE of a batch and its exact gradient with respect to
/// every weight and bias.
pub fn loss_and_gradients(model: &AutoencoderModel, batch: &[&[f64]]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let flat = flatten(batch, model.input_dim())?;
    let mut grads = Gradients::zeros_like(model);
    let losses = backprop(model, &flat, batch.len(), &mut grads);
    Ok((losses.iter().sum::<f64>() / losses.len() as f64, grads))
}

/// Mean reconstruction MSE of a batch, forward only.
pub fn batch_loss(model: &AutoencoderModel, batch: &[&[f64]]) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let losses = per_sample_losses(model, batch)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn per_sample_losses(model: &AutoencoderModel, inputs: &[&[f64]]) -> Result<Vec<f64>> {
    let dim = model.input_dim();
    let mut losses = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(SCORE_CHUNK) {
        let flat = flatten(chunk, dim)?;
        let acts = model.forward_cached(&flat, chunk.len());
        let out = acts.last().unwrap();
        for b in 0..chunk.len() {
            losses.push(mse(&flat[b * dim..(b + 1) * dim], &out[b * dim..(b + 1) * dim]));
        }
    }
    Ok(losses)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 42,
            patience: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(invalid("epochs, batch size and patience must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(invalid("learning rate must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean per-sample loss seen by the optimiser during the epoch (each
    /// sample evaluated just before its batch update).
    pub train_loss: f64,
    /// Mean loss over the validation set after the epoch.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation loss, or the final
    /// ones when there is no validation set.
    pub model: AutoencoderModel,
    pub history: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Stream of the ChaCha8 generator used for batch shuffling, kept apart from
/// the weight-initialisation stream.
const SHUFFLE_STREAM: u64 = 1;

/// Mini-batch gradient descent on mean reconstruction MSE.
///
/// Each epoch shuffles the training indices with ChaCha8 (seeded from
/// `config.seed`, stream 1) and applies `w -= lr * grad` per batch.
pub fn train(
    model: AutoencoderModel,
    train_set: &[FeatureTensor],
    val_set: &[FeatureTensor],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let dim = model.input_dim();
    for t in train_set.iter().chain(val_set) {
        model.check_input(t.dim())?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = Gradients::zeros_like(&model);
    let mut model = model;
    let mut sample_losses = vec![0.0; train_set.len()];
    let val_inputs: Vec<&[f64]> = val_set.iter().map(|t| t.values.as_slice()).collect();

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, AutoencoderModel)> = None;
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut flat = Vec::with_capacity(config.batch_size * dim);
        for batch in order.chunks(config.batch_size) {
            flat.clear();
            for &i in batch {
                flat.extend_from_slice(&train_set[i].values);
            }
            let losses = backprop(&model, &flat, batch.len(), &mut grads);
            for (&i, l) in batch.iter().zip(losses) {
                sample_losses[i] = l;
            }
            if config.learning_rate != 0.0 {
                for (layer, (gw, gb)) in model.layers.iter_mut().zip(grads.weights.iter().zip(&grads.bias)) {
                    axpy(-config.learning_rate, gw, &mut layer.weights);
                    axpy(-config.learning_rate, gb, &mut layer.bias);
                }
            }
        }
        let train_loss = sample_losses.iter().sum::<f64>() / sample_losses.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        let val_loss = if val_inputs.is_empty() {
            None
        } else {
            let l = per_sample_losses(&model, &val_inputs)?;
            let v = l.iter().sum::<f64>() / l.len() as f64;
            if !v.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            Some(v)
        };
        history.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });

        if let Some(v) = val_loss {
            let improved = best.as_ref().is_none_or(|(b, _, _)| v < *b);
            if improved {
                match &mut best {
                    Some((bv, be, bm)) => {
                        *bv = v;
                        *be = epoch;
                        bm.copy_parameters_from(&model);
                    }
                    None => best = Some((v, epoch, model.clone())),
                }
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, epoch, m)) => (m, epoch),
        None => (model, history.len()),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        stopped_early,
    })
}

/// Standardizes each tensor and scores it by reconstruction MSE, keeping
/// input order.
pub fn score_events(
    model: &AutoencoderModel,
    standardizer: &Standardizer,
    tensors: &[FeatureTensor],
) -> Result<Vec<(usize, f64)>> {
    let standardized = tensors
        .iter()
        .map(|t| standardizer.apply(t))
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<&[f64]> = standardized.iter().map(|t| t.values.as_slice()).collect();
    let losses = per_sample_losses(model, &inputs)?;
    Ok(tensors.iter().map(|t| t.event_ref).zip(losses).collect())
}
