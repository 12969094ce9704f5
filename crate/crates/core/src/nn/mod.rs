//! Small feed-forward networks with hand-written backpropagation.
//!
//! Vectors are flat `f64` slices. Convolution layers read their input as
//! `channels_in` consecutive rows of equal length and pad circularly.

mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load, save, CHECKPOINT_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Layer with its parameters. Weights are row-major: dense `[out][in]`,
/// conv `[out][in][kernel]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    Conv1d {
        channels_in: usize,
        channels_out: usize,
        kernel: usize,
        stride: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Flatten,
}

/// Layer description without parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        outputs: usize,
    },
    Relu,
    Conv1d {
        channels_out: usize,
        kernel: usize,
        stride: usize,
    },
    Flatten,
}

impl Layer {
    fn params(&self) -> (&[f64], &[f64]) {
        match self {
            Layer::Dense { weights, bias, .. } | Layer::Conv1d { weights, bias, .. } => {
                (weights, bias)
            }
            _ => (&[], &[]),
        }
    }

    fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        match self {
            Layer::Dense { weights, bias, .. } | Layer::Conv1d { weights, bias, .. } => {
                (weights, bias)
            }
            _ => (&mut [], &mut []),
        }
    }

    pub fn num_params(&self) -> usize {
        let (w, b) = self.params();
        w.len() + b.len()
    }

    /// Output length for an input of length `n`.
    fn output_len(&self, n: usize) -> Result<usize, NnError> {
        match *self {
            Layer::Dense {
                inputs, outputs, ..
            } => {
                if n != inputs {
                    return Err(NnError::ShapeMismatch(format!(
                        "dense expects {inputs} inputs, got {n}"
                    )));
                }
                Ok(outputs)
            }
            Layer::Relu | Layer::Flatten => Ok(n),
            Layer::Conv1d {
                channels_in,
                channels_out,
                stride,
                ..
            } => {
                if n == 0 || n % channels_in != 0 {
                    return Err(NnError::ShapeMismatch(format!(
                        "conv1d with {channels_in} channels got length {n}"
                    )));
                }
                Ok(channels_out * (n / channels_in).div_ceil(stride))
            }
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Layer::Dense {
                inputs,
                outputs,
                weights,
                bias,
            } => (0..*outputs)
                .map(|o| {
                    let row = &weights[o * inputs..(o + 1) * inputs];
                    bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect(),
            Layer::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            Layer::Flatten => x.to_vec(),
            Layer::Conv1d {
                channels_in,
                channels_out,
                kernel,
                stride,
                weights,
                bias,
            } => {
                let len = x.len() / channels_in;
                let out_len = len.div_ceil(*stride);
                let half = kernel / 2;
                let mut y = vec![0.0; channels_out * out_len];
                for o in 0..*channels_out {
                    for t in 0..out_len {
                        let mut acc = bias[o];
                        for c in 0..*channels_in {
                            let wrow = &weights[(o * channels_in + c) * kernel..][..*kernel];
                            let xrow = &x[c * len..(c + 1) * len];
                            for (k, w) in wrow.iter().enumerate() {
                                acc += w * xrow[(t * stride + k + len * kernel - half) % len];
                            }
                        }
                        y[o * out_len + t] = acc;
                    }
                }
                y
            }
        }
    }

    /// Gradient w.r.t. the input, accumulating parameter gradients into
    /// `gw`/`gb`.
    fn backward(
        &self,
        x: &[f64],
        y: &[f64],
        dy: &[f64],
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> Vec<f64> {
        match self {
            Layer::Dense {
                inputs,
                outputs,
                weights,
                ..
            } => {
                let mut dx = vec![0.0; *inputs];
                for o in 0..*outputs {
                    let g = dy[o];
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    let row = &weights[o * inputs..(o + 1) * inputs];
                    let grow = &mut gw[o * inputs..(o + 1) * inputs];
                    for i in 0..*inputs {
                        grow[i] += g * x[i];
                        dx[i] += g * row[i];
                    }
                }
                dx
            }
            Layer::Relu => x
                .iter()
                .zip(dy)
                .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                .collect(),
            Layer::Flatten => dy.to_vec(),
            Layer::Conv1d {
                channels_in,
                channels_out,
                kernel,
                stride,
                weights,
                ..
            } => {
                let len = x.len() / channels_in;
                let out_len = y.len() / channels_out;
                let half = kernel / 2;
                let mut dx = vec![0.0; x.len()];
                for o in 0..*channels_out {
                    for t in 0..out_len {
                        let g = dy[o * out_len + t];
                        if g == 0.0 {
                            continue;
                        }
                        gb[o] += g;
                        for c in 0..*channels_in {
                            let base = (o * channels_in + c) * kernel;
                            for k in 0..*kernel {
                                let idx = c * len + (t * stride + k + len * kernel - half) % len;
                                gw[base + k] += g * x[idx];
                                dx[idx] += g * weights[base + k];
                            }
                        }
                    }
                }
                dx
            }
        }
    }
}

/// A sequential network over inputs of a fixed length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub input_len: usize,
    pub layers: Vec<Layer>,
}

/// Parameter gradients, one `(weights, bias)` pair per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Net) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    let (w, b) = l.params();
                    (vec![0.0; w.len()], vec![0.0; b.len()])
                })
                .collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(a, o)| *a += o);
            b.iter_mut().zip(ob).for_each(|(a, o)| *a += o);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= s);
        }
    }

    /// All entries in layer order, weights before bias.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Net {
    /// Builds a network with uniform(±1/√fan_in) weights and biases.
    pub fn new(input_len: usize, specs: &[LayerSpec], seed: u64) -> Result<Net, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(specs.len());
        let mut n = input_len;
        let mut channels = 1usize;
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Dense { outputs } => {
                    let bound = 1.0 / (n as f64).sqrt();
                    Layer::Dense {
                        inputs: n,
                        outputs,
                        weights: (0..n * outputs)
                            .map(|_| rng.gen_range(-bound..=bound))
                            .collect(),
                        bias: (0..outputs)
                            .map(|_| rng.gen_range(-bound..=bound))
                            .collect(),
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Conv1d {
                    channels_out,
                    kernel,
                    stride,
                } => {
                    if kernel == 0 || stride == 0 {
                        return Err(NnError::ShapeMismatch(
                            "conv1d kernel and stride must be positive".into(),
                        ));
                    }
                    let fan_in = channels * kernel;
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    Layer::Conv1d {
                        channels_in: channels,
                        channels_out,
                        kernel,
                        stride,
                        weights: (0..channels_out * fan_in)
                            .map(|_| rng.gen_range(-bound..=bound))
                            .collect(),
                        bias: (0..channels_out)
                            .map(|_| rng.gen_range(-bound..=bound))
                            .collect(),
                    }
                }
            };
            n = layer.output_len(n)?;
            match layer {
                Layer::Conv1d { channels_out, .. } => channels = channels_out,
                Layer::Dense { .. } | Layer::Flatten => channels = 1,
                Layer::Relu => {}
            }
            layers.push(layer);
        }
        let net = Net { input_len, layers };
        net.validate()?;
        Ok(net)
    }

    /// `dense(n, out)`.
    pub fn linear(n: usize, out: usize, seed: u64) -> Net {
        Net::new(n, &[LayerSpec::Dense { outputs: out }], seed).expect("valid linear net")
    }

    /// `dense(n, 128) - relu - dense(128, out)`.
    pub fn mlp(n: usize, out: usize, seed: u64) -> Net {
        Net::new(
            n,
            &[
                LayerSpec::Dense { outputs: 128 },
                LayerSpec::Relu,
                LayerSpec::Dense { outputs: out },
            ],
            seed,
        )
        .expect("valid mlp")
    }

    /// Convolutional trunk specs shared by the CNN models and the Q-network.
    pub fn cnn_trunk() -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv1d {
                channels_out: 8,
                kernel: 5,
                stride: 2,
            },
            LayerSpec::Relu,
            LayerSpec::Conv1d {
                channels_out: 16,
                kernel: 5,
                stride: 2,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { outputs: 128 },
            LayerSpec::Relu,
        ]
    }

    /// Convolutional trunk followed by `dense(128, out)`.
    pub fn cnn(n: usize, out: usize, seed: u64) -> Net {
        let mut specs = Net::cnn_trunk();
        specs.push(LayerSpec::Dense { outputs: out });
        Net::new(n, &specs, seed).expect("valid cnn")
    }

    /// Checks that layer shapes compose and parameters are finite.
    pub fn validate(&self) -> Result<usize, NnError> {
        let mut n = self.input_len;
        for l in &self.layers {
            let expected = match l {
                Layer::Dense {
                    inputs, outputs, ..
                } => inputs * outputs + outputs,
                Layer::Conv1d {
                    channels_in,
                    channels_out,
                    kernel,
                    ..
                } => channels_out * channels_in * kernel + channels_out,
                _ => 0,
            };
            if l.num_params() != expected {
                return Err(NnError::ShapeMismatch(
                    "parameter array length disagrees with layer shape".into(),
                ));
            }
            if let Layer::Conv1d { kernel: 0, .. } | Layer::Conv1d { stride: 0, .. } = l {
                return Err(NnError::ShapeMismatch(
                    "conv1d kernel and stride must be positive".into(),
                ));
            }
            let (w, b) = l.params();
            if !w.iter().chain(b).all(|v| v.is_finite()) {
                return Err(NnError::ShapeMismatch("non-finite parameter".into()));
            }
            n = l.output_len(n)?;
        }
        Ok(n)
    }

    pub fn output_len(&self) -> usize {
        self.validate().expect("valid network")
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.input_len {
            return Err(NnError::ShapeMismatch(format!(
                "expected input of length {}, got {}",
                self.input_len,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in &self.layers {
            a = l.forward(&a);
        }
        Ok(a)
    }

    /// Activations before every layer plus the output.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in &self.layers {
            let next = l.forward(acts.last().expect("non-empty"));
            acts.push(next);
        }
        acts
    }

    /// Gradients of `output · upstream` w.r.t. every parameter and the input.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Gradients, Vec<f64>), NnError> {
        let mut grads = Gradients::zeros_like(self);
        let dx = self.backward_into(x, upstream, &mut grads)?;
        Ok((grads, dx))
    }

    /// Like [`backward`](Self::backward), adding the parameter gradients
    /// into `grads`. Returns the input gradient.
    pub fn backward_into(
        &self,
        x: &[f64],
        upstream: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let acts = self.trace(x);
        let out = acts.last().expect("non-empty");
        if upstream.len() != out.len() {
            return Err(NnError::ShapeMismatch(format!(
                "upstream gradient has length {}, output has {}",
                upstream.len(),
                out.len()
            )));
        }
        let mut g = upstream.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let (gw, gb) = &mut grads.layers[i];
            g = l.backward(&acts[i], &acts[i + 1], &g, gw, gb);
        }
        Ok(g)
    }

    /// `p ← p − lr·g` for every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        assert!(lr >= 0.0, "learning rate must be non-negative");
        for (l, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            let (w, b) = l.params_mut();
            w.iter_mut().zip(gw).for_each(|(p, g)| *p -= lr * g);
            b.iter_mut().zip(gb).for_each(|(p, g)| *p -= lr * g);
        }
    }

    /// All parameters in layer order, weights before bias.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| {
                let (w, b) = l.params();
                w.iter().chain(b).copied().collect::<Vec<_>>()
            })
            .collect()
    }

    /// Inverse of [`params`](Self::params).
    pub fn set_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "parameter count");
        let mut k = 0;
        for l in &mut self.layers {
            let (w, b) = l.params_mut();
            for p in w.iter_mut().chain(b.iter_mut()) {
                *p = values[k];
                k += 1;
            }
        }
    }

    /// Copies parameters from a network of identical shape.
    pub fn copy_from(&mut self, other: &Net) {
        assert_eq!(self.layers.len(), other.layers.len(), "layer count");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            let (bw, bb) = b.params();
            let (aw, ab) = a.params_mut();
            aw.copy_from_slice(bw);
            ab.copy_from_slice(bb);
        }
    }
}

/// Softmax cross-entropy against `class`, with its gradient w.r.t. the
/// logits.
pub fn cross_entropy(logits: &[f64], class: usize) -> (f64, Vec<f64>) {
    assert!(class < logits.len(), "class index out of range");
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + m - logits[class];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[class] -= 1.0;
    (loss, grad)
}

/// Mean squared error and its gradient w.r.t. `pred`.
pub fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(pred.len(), target.len(), "mse needs equal lengths");
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    (loss, grad)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
