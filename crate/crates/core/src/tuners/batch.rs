use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{snap, BestValueCurve, ParamName, SweepDataset, TunerError};
use crate::local_planner::NavParams;
use crate::nn::{argmax, cross_entropy, mse, Gradients, Net};
use crate::robot_sim::{TuneContext, TunerPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Nn,
    Cnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Classifier,
    Regressor,
}

/// An observation labelled with a grid value.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: f64,
}

/// Every observation of the sweep labelled with the curve's value for its
/// run's spacing.
pub fn label_observations(ds: &SweepDataset, curve: &BestValueCurve) -> Vec<Sample> {
    let mut out = Vec::new();
    for r in &ds.records {
        let Some(label) = curve.value(ds.param, r.spacing) else {
            continue;
        };
        out.extend(r.observations.iter().map(|o| Sample {
            x: o.to_f64(),
            label,
        }));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for BatchTrainConfig {
    fn default() -> Self {
        BatchTrainConfig {
            epochs: 20,
            lr: 1e-2,
            batch_size: 32,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Predicts one parameter from an observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchModel {
    pub kind: ModelKind,
    pub head: HeadKind,
    pub param: ParamName,
    /// Grid of the predicted parameter, ascending.
    pub values: Vec<f64>,
    pub net: Net,
}

impl BatchModel {
    pub fn new(
        kind: ModelKind,
        head: HeadKind,
        param: ParamName,
        input_len: usize,
        seed: u64,
    ) -> Self {
        let values = param.values();
        let out = match head {
            HeadKind::Classifier => values.len(),
            HeadKind::Regressor => 1,
        };
        let net = match kind {
            ModelKind::Linear => Net::linear(input_len, out, seed),
            ModelKind::Nn => Net::mlp(input_len, out, seed),
            ModelKind::Cnn => Net::cnn(input_len, out, seed),
        };
        BatchModel {
            kind,
            head,
            param,
            values,
            net,
        }
    }

    /// Raw network output before any grid mapping.
    pub fn raw(&self, x: &[f64]) -> Vec<f64> {
        self.net.forward(x).expect("input length matches the model")
    }

    /// Grid index of the prediction; regressor outputs snap to the
    /// nearest value.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let y = self.raw(x);
        match self.head {
            HeadKind::Classifier => argmax(&y),
            HeadKind::Regressor => snap(&self.values, y[0]),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.values[self.predict_index(x)]
    }

    fn loss_grad(&self, x: &[f64], label: f64) -> (f64, Vec<f64>) {
        let y = self.raw(x);
        match self.head {
            HeadKind::Classifier => cross_entropy(&y, snap(&self.values, label)),
            HeadKind::Regressor => mse(&y, &[label]),
        }
    }

    /// Mean loss and on-grid accuracy over `data`.
    pub fn evaluate(&self, data: &[&Sample]) -> (f64, f64) {
        if data.is_empty() {
            return (0.0, 1.0);
        }
        let mut loss = 0.0;
        let mut hits = 0;
        for s in data {
            loss += self.loss_grad(&s.x, s.label).0;
            if self.predict_index(&s.x) == snap(&self.values, s.label) {
                hits += 1;
            }
        }
        (loss / data.len() as f64, hits as f64 / data.len() as f64)
    }
}

/// Per-epoch training record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchTrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch of the returned snapshot.
    pub best_epoch: usize,
    pub train_size: usize,
    pub val_size: usize,
}

/// Deterministic shuffled split; the first `fraction` (at least one sample
/// when there are two or more) is held out.
pub fn split_holdout<T>(data: &[T], fraction: f64, seed: u64) -> (Vec<&T>, Vec<&T>) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = if data.len() < 2 {
        0
    } else {
        ((data.len() as f64 * fraction).ceil() as usize).clamp(1, data.len() - 1)
    };
    let val = idx[..n_val].iter().map(|&i| &data[i]).collect();
    let train = idx[n_val..].iter().map(|&i| &data[i]).collect();
    (train, val)
}

/// Minibatch SGD with a held-out split; returns the snapshot with the best
/// validation accuracy (ties: lower validation loss, then earlier epoch).
pub fn train_batch_model(
    kind: ModelKind,
    head: HeadKind,
    param: ParamName,
    data: &[Sample],
    cfg: &BatchTrainConfig,
) -> Result<(BatchModel, BatchTrainReport), TunerError> {
    let input_len = data.first().ok_or(TunerError::EmptyDataset)?.x.len();
    let mut model = BatchModel::new(kind, head, param, input_len, cfg.seed);
    let (mut train, val) = split_holdout(data, cfg.val_fraction, cfg.seed ^ 0x5eed);
    let val = if val.is_empty() { train.clone() } else { val };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let (l0, a0) = model.evaluate(&val);
    let mut best = (model.clone(), a0, l0, 0usize);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        train.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train.chunks(cfg.batch_size.max(1)) {
            let mut grads = Gradients::zeros_like(&model.net);
            for s in chunk {
                let (loss, g) = model.loss_grad(&s.x, s.label);
                total += loss;
                model.net.backward_into(&s.x, &g, &mut grads)?;
            }
            grads.scale(1.0 / chunk.len() as f64);
            model.net.sgd_step(&grads, cfg.lr);
        }
        let (val_loss, val_accuracy) = model.evaluate(&val);
        epochs.push(EpochStats {
            epoch,
            train_loss: total / train.len().max(1) as f64,
            val_loss,
            val_accuracy,
        });
        if val_accuracy > best.1 || (val_accuracy == best.1 && val_loss < best.2) {
            best = (model.clone(), val_accuracy, val_loss, epoch);
        }
    }
    let report = BatchTrainReport {
        epochs,
        best_epoch: best.3,
        train_size: train.len(),
        val_size: val.len(),
    };
    Ok((best.0, report))
}

/// One batch model per tuned parameter; the rest stay at `defaults`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchPolicy {
    pub models: Vec<BatchModel>,
    pub defaults: NavParams,
}

impl BatchPolicy {
    pub fn params_for(&self, x: &[f64]) -> NavParams {
        let mut p = self.defaults;
        for m in &self.models {
            m.param.set(&mut p, m.predict(x));
        }
        p
    }
}

impl TunerPolicy for BatchPolicy {
    fn tune(&self, ctx: &TuneContext<'_>, _: &mut ChaCha8Rng) -> NavParams {
        self.params_for(&ctx.obs.to_f64())
    }

    fn name(&self) -> String {
        match self.models.first() {
            Some(m) => format!("batch_{}_{}", kind_str(m.kind), head_str(m.head)),
            None => "batch".into(),
        }
    }
}

fn kind_str(k: ModelKind) -> &'static str {
    match k {
        ModelKind::Linear => "linear",
        ModelKind::Nn => "nn",
        ModelKind::Cnn => "cnn",
    }
}

fn head_str(h: HeadKind) -> &'static str {
    match h {
        HeadKind::Classifier => "classifier",
        HeadKind::Regressor => "regressor",
    }
}
