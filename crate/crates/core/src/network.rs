//! Dense feed-forward regression network with hand-written backpropagation.
//!
//! Weight layer `i` maps `dims[i]` inputs to `dims[i + 1]` outputs. Weights are
//! stored row-major with shape `(in, out)`, i.e. `w[i * out + o]`.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::scalers::ScaleMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative w.r.t. the pre-activation; the ReLU subgradient at 0 is 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
}

/// Hidden widths of the default regressor: eight 64-wide layers and a 32-wide layer.
pub const DEFAULT_HIDDEN: [usize; 9] = [64, 64, 64, 64, 64, 64, 64, 64, 32];
pub const DEFAULT_LEARNING_RATE: f64 = 0.02;
pub const DEFAULT_EPOCHS: usize = 400;
pub const DEFAULT_BATCH_SIZE: usize = 8;
pub const RGB_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub loss: Loss,
}

impl NetworkConfig {
    /// Hidden layers use ReLU, except under max-abs scaling where every layer
    /// is linear. The output layer is always linear.
    pub fn for_scaler(input_dim: usize, hidden: &[usize], method: ScaleMethod, seed: u64) -> Self {
        let mut layer_dims = Vec::with_capacity(hidden.len() + 2);
        layer_dims.push(input_dim);
        layer_dims.extend_from_slice(hidden);
        layer_dims.push(RGB_CHANNELS);
        NetworkConfig {
            activations: activation_policy(method, layer_dims.len() - 1),
            layer_dims,
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            seed,
            loss: Loss::Mse,
        }
    }

    pub fn weight_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims.first().copied().unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims.last().copied().unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        parameter_count(&self.layer_dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::invalid(
                "need at least an input and an output dimension",
            ));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if self.activations.len() != self.weight_layers() {
            return Err(Error::invalid(format!(
                "{} activations for {} weight layers",
                self.activations.len(),
                self.weight_layers()
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }

    /// The RGB regressor shape: `max_len` inputs, three outputs.
    pub fn validate_rgb(&self, max_len: usize) -> Result<()> {
        self.validate()?;
        if self.input_dim() != max_len {
            return Err(Error::invalid(format!(
                "first layer dimension {} does not match max_len {max_len}",
                self.input_dim()
            )));
        }
        if self.output_dim() != RGB_CHANNELS {
            return Err(Error::invalid(format!(
                "last layer dimension must be {RGB_CHANNELS}, got {}",
                self.output_dim()
            )));
        }
        Ok(())
    }
}

pub fn activation_policy(method: ScaleMethod, weight_layers: usize) -> Vec<Activation> {
    let hidden = match method {
        ScaleMethod::MaxAbs => Activation::Linear,
        _ => Activation::Relu,
    };
    let mut acts = vec![hidden; weight_layers];
    if let Some(last) = acts.last_mut() {
        *last = Activation::Linear;
    }
    acts
}

/// `Σ (dims[i] * dims[i+1] + dims[i+1])`.
pub fn parameter_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weight(&self, i: usize, o: usize) -> f64 {
        self.weights[i * self.outputs + o]
    }

    /// Weights as `inputs` rows of `outputs` columns.
    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights
            .chunks(self.outputs)
            .map(<[f64]>::to_vec)
            .collect()
    }

    fn affine_into(&self, x: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.biases);
        for (xi, row) in x.iter().zip(self.weights.chunks_exact(self.outputs)) {
            if *xi == 0.0 {
                continue;
            }
            for (zo, w) in z.iter_mut().zip(row) {
                *zo += xi * w;
            }
        }
    }
}

/// Gradients laid out exactly like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.biases.len()])
                .collect(),
        }
    }

    fn clear(&mut self) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .for_each(|g| g.fill(0.0));
    }

    fn scale(&mut self, k: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flat_map(|g| g.iter_mut())
            .for_each(|g| *g *= k);
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .fold(0.0, |m, g| f64::max(m, g.abs()))
    }
}

/// Per-layer pre-activations and activations of one forward pass.
#[derive(Debug, Clone, Default)]
struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Layer>,
}

impl Network {
    /// Seeded fan-in-scaled uniform weights (`±sqrt(6 / fan_in)` before ReLU,
    /// `±sqrt(3 / fan_in)` before a linear activation); zero biases.
    pub fn init(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = config
            .layer_dims
            .windows(2)
            .zip(&config.activations)
            .map(|(dims, &activation)| {
                let (inputs, outputs) = (dims[0], dims[1]);
                let gain = match activation {
                    Activation::Relu => 6.0,
                    Activation::Linear => 3.0,
                };
                let limit = (gain / inputs as f64).sqrt();
                let weights = (0..inputs * outputs)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Layer {
                    inputs,
                    outputs,
                    weights,
                    biases: vec![0.0; outputs],
                    activation,
                }
            })
            .collect();
        Ok(Network { config, layers })
    }

    /// Rebuilds a network from per-layer `(in, out)` weight rows and biases.
    pub fn from_parts(
        config: NetworkConfig,
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        config.validate()?;
        let n = config.weight_layers();
        if weights.len() != n || biases.len() != n {
            return Err(Error::Checkpoint(format!(
                "expected {n} weight layers, found {} weight and {} bias arrays",
                weights.len(),
                biases.len()
            )));
        }
        let mut layers = Vec::with_capacity(n);
        for (i, (rows, bias)) in weights.into_iter().zip(biases).enumerate() {
            let (inputs, outputs) = (config.layer_dims[i], config.layer_dims[i + 1]);
            if rows.len() != inputs || rows.iter().any(|r| r.len() != outputs) {
                return Err(Error::Checkpoint(format!(
                    "layer {i} weights are not {inputs}x{outputs}"
                )));
            }
            if bias.len() != outputs {
                return Err(Error::Checkpoint(format!(
                    "layer {i} bias has length {}, expected {outputs}",
                    bias.len()
                )));
            }
            let weights: Vec<f64> = rows.into_iter().flatten().collect();
            if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
            layers.push(Layer {
                inputs,
                outputs,
                weights,
                biases: bias,
                activation: config.activations[i],
            });
        }
        Ok(Network { config, layers })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let expected = self.config.input_dim();
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.outputs];
            layer.affine_into(&a, &mut z);
            z.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            a = z;
        }
        Ok(a)
    }

    fn forward_trace(&self, x: &[f64], trace: &mut Trace) {
        trace.pre.resize_with(self.layers.len(), Vec::new);
        trace.post.resize_with(self.layers.len(), Vec::new);
        for (i, layer) in self.layers.iter().enumerate() {
            let (before, after) = trace.post.split_at_mut(i);
            let input = if i == 0 { x } else { &before[i - 1] };
            let z = &mut trace.pre[i];
            z.resize(layer.outputs, 0.0);
            layer.affine_into(input, z);
            let a = &mut after[0];
            a.clear();
            a.extend(z.iter().map(|&v| layer.activation.apply(v)));
        }
    }

    /// Exact gradients of [`loss_mse`] at `(x, target)`. Returns the loss as well.
    pub fn backward(&self, x: &[f64], target: &[f64]) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        if target.len() != self.config.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.config.output_dim(),
                actual: target.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate(x, target, &mut Trace::default(), &mut grads);
        Ok((loss, grads))
    }

    /// Adds this sample's gradients into `grads`; shapes must already be checked.
    fn accumulate(
        &self,
        x: &[f64],
        target: &[f64],
        trace: &mut Trace,
        grads: &mut Gradients,
    ) -> f64 {
        self.forward_trace(x, trace);
        let output = trace.post.last().expect("at least one layer");
        let n = output.len() as f64;
        let loss = loss_mse(output, target);

        // dL/dz for the output layer.
        let last = self.layers.len() - 1;
        trace.delta.clear();
        trace.delta.extend(
            output
                .iter()
                .zip(target)
                .zip(&trace.pre[last])
                .map(|((y, t), z)| 2.0 * (y - t) / n * self.layers[last].activation.derivative(*z)),
        );

        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = if i == 0 { x } else { &trace.post[i - 1] };
            let gw = &mut grads.weights[i];
            for (xi, grow) in input.iter().zip(gw.chunks_exact_mut(layer.outputs)) {
                if *xi == 0.0 {
                    continue;
                }
                for (g, d) in grow.iter_mut().zip(&trace.delta) {
                    *g += xi * d;
                }
            }
            for (g, d) in grads.biases[i].iter_mut().zip(&trace.delta) {
                *g += d;
            }
            if i > 0 {
                let prev_act = self.layers[i - 1].activation;
                trace.next_delta.clear();
                trace.next_delta.extend(
                    layer
                        .weights
                        .chunks_exact(layer.outputs)
                        .zip(&trace.pre[i - 1])
                        .map(|(row, z)| {
                            let back: f64 = row.iter().zip(&trace.delta).map(|(w, d)| w * d).sum();
                            back * prev_act.derivative(*z)
                        }),
                );
                std::mem::swap(&mut trace.delta, &mut trace.next_delta);
            }
        }
        loss
    }

    fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(gb) {
                *b -= learning_rate * g;
            }
        }
    }

    /// Mean per-sample loss over `pairs`.
    pub fn mean_loss(&self, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::EmptyTrainingData);
        }
        let mut total = 0.0;
        for (x, t) in pairs {
            total += loss_mse(&self.forward(x)?, t);
        }
        Ok(total / pairs.len() as f64)
    }

    pub fn predict_rgb(&self, x: &[f64]) -> Result<Rgb> {
        let out = self.forward(x)?;
        if out.len() != RGB_CHANNELS {
            return Err(Error::DimensionMismatch {
                expected: RGB_CHANNELS,
                actual: out.len(),
            });
        }
        Ok(output_to_rgb([out[0], out[1], out[2]]))
    }
}

/// Mean of squared differences.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> f64 {
    debug_assert_eq!(pred.len(), target.len());
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    sum / pred.len() as f64
}

/// Scale by 255, clamp to `[0, 255]`, round to nearest.
pub fn output_to_rgb(out: [f64; 3]) -> Rgb {
    let ch = out.map(|v| (v * 255.0).clamp(0.0, 255.0).round() as u8);
    Rgb::from(ch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss before the first update.
    pub initial_loss: f64,
    /// Mean training loss after each epoch.
    pub epoch_losses: Vec<f64>,
    pub final_test_loss: Option<f64>,
    pub parameter_count: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl TrainReport {
    pub fn final_train_loss(&self) -> f64 {
        self.epoch_losses
            .last()
            .copied()
            .unwrap_or(self.initial_loss)
    }
}

/// Seeded mini-batch gradient descent on pre-scaled `(input, target)` pairs.
pub fn train(
    config: &NetworkConfig,
    train_pairs: &[(Vec<f64>, Vec<f64>)],
    test_pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<(Network, TrainReport)> {
    let started = Instant::now();
    let mut net = Network::init(config.clone())?;
    if train_pairs.is_empty() {
        return Err(Error::EmptyTrainingData);
    }
    for (x, t) in train_pairs.iter().chain(test_pairs) {
        net.check_input(x)?;
        if t.len() != config.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: config.output_dim(),
                actual: t.len(),
            });
        }
    }

    let initial_loss = net.mean_loss(train_pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    let mut grads = Gradients::zeros_like(&net);
    let mut trace = Trace::default();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            for &idx in batch {
                let (x, t) = &train_pairs[idx];
                net.accumulate(x, t, &mut trace, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            net.apply_gradients(&grads, config.learning_rate);
        }
        let loss = net.mean_loss(train_pairs)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch: epoch + 1 });
        }
        epoch_losses.push(loss);
    }

    let final_test_loss = if test_pairs.is_empty() {
        None
    } else {
        Some(net.mean_loss(test_pairs)?)
    };
    let report = TrainReport {
        initial_loss,
        epoch_losses,
        final_test_loss,
        parameter_count: net.parameter_count(),
        wall_time: started.elapsed(),
    };
    Ok((net, report))
}
