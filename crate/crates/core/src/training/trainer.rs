use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::Network;

use super::bptt::accumulate_gradients;
use super::series::{make_windows, masked_mse, Sample, SparseSeries};

/// Which layer groups receive updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeSpec {
    pub recurrent: bool,
    pub dense: bool,
}

impl FreezeSpec {
    pub const ALL: FreezeSpec = FreezeSpec { recurrent: true, dense: true };
    pub const DENSE_ONLY: FreezeSpec = FreezeSpec { recurrent: false, dense: true };
    pub const RECURRENT_ONLY: FreezeSpec = FreezeSpec { recurrent: true, dense: false };

    /// Sets the network's per-layer trainable flags.
    pub fn apply(&self, net: &mut Network) -> Result<()> {
        if !self.recurrent && !self.dense {
            return Err(Error::Config("at least one layer group must be trainable".into()));
        }
        if !self.recurrent && net.dense().is_empty() {
            return Err(Error::Config("network has no dense layers to train".into()));
        }
        net.set_trainable(0, self.recurrent)?;
        for l in 1..net.layer_count() {
            net.set_trainable(l, self.dense)?;
        }
        Ok(())
    }
}

impl Default for FreezeSpec {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub window: usize,
    pub stride: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub freeze: FreezeSpec,
    pub optimizer: Optimizer,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub keep_unobserved_windows: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            window: 48,
            stride: 12,
            batch_size: 32,
            epochs: 100,
            patience: 5,
            learning_rate: 1e-3,
            seed: 0,
            freeze: FreezeSpec::ALL,
            optimizer: Optimizer::adam(),
            clip_norm: Some(1.0),
            keep_unobserved_windows: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.stride == 0 || self.batch_size == 0 {
            return Err(Error::Config("window, stride and batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("clip norm {c} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch losses plus the early-stopping outcome.
///
/// `best_epoch` is `None` when no epoch improved on the validation loss of
/// the starting weights, in which case those weights are returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub initial_val_loss: f64,
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainingHistory {
    /// CSV with columns `epoch,train_loss,val_loss`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for r in &self.records {
            w.write_record([r.epoch.to_string(), r.train_loss.to_string(), r.val_loss.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Masked MSE of the network run over the whole series from the zero state.
pub fn series_loss(net: &Network, series: &SparseSeries) -> Result<f64> {
    let pred = net.predict(&series.features, None)?;
    masked_mse(&pred, &series.target, &series.mask)
}

/// Mean loss and gradient over a batch, each sample weighted equally.
pub fn batch_gradients(net: &Network, batch: &[&Sample]) -> Result<(f64, Network)> {
    if batch.is_empty() {
        return Err(Error::empty("empty batch"));
    }
    let mut grad = net.zeroed();
    let w = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        loss += w * accumulate_gradients(net, s, w, &mut grad)?;
    }
    Ok((loss, grad))
}

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, lr: f64, n: usize) -> Self {
        let (m, v) = match kind {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam { .. } => (vec![0.0; n], vec![0.0; n]),
        };
        Self { kind, lr, m, v, step: 0 }
    }

    fn update(&mut self, theta: &mut [f64], grad: &[f64], active: &[bool]) {
        self.step += 1;
        match self.kind {
            Optimizer::Sgd => {
                for ((p, g), a) in theta.iter_mut().zip(grad).zip(active) {
                    if *a {
                        *p -= self.lr * g;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for k in 0..theta.len() {
                    if !active[k] {
                        continue;
                    }
                    self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * grad[k];
                    self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * grad[k] * grad[k];
                    theta[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + epsilon);
                }
            }
        }
    }
}

fn active_mask(net: &Network) -> Vec<bool> {
    let mut out = vec![false; net.param_count()];
    for (range, on) in net.layer_param_ranges().into_iter().zip(net.trainable()) {
        out[range].fill(*on);
    }
    out
}

/// Trains on `samples` with per-epoch shuffling, validation on the full
/// `val` series, patience-based early stopping and best-weight restore.
pub fn train_samples(
    net: &Network,
    samples: &[Sample],
    val: &SparseSeries,
    cfg: &TrainingConfig,
) -> Result<(Network, TrainingHistory)> {
    cfg.validate()?;
    let mut net = net.clone();
    cfg.freeze.apply(&mut net)?;
    let initial_val_loss = series_loss(&net, val)?;
    let mut history = TrainingHistory {
        initial_val_loss,
        records: Vec::new(),
        best_epoch: None,
        best_val_loss: initial_val_loss,
        stopped_early: false,
    };
    if cfg.epochs == 0 {
        return Ok((net, history));
    }
    let usable: Vec<&Sample> = samples.iter().filter(|s| s.observed_count() > 0).collect();
    if usable.is_empty() {
        return Err(Error::empty("no training window contains an observed target"));
    }

    let active = active_mask(&net);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, net.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut best = net.clone();
    let mut since_best = 0;
    let mut theta = net.params_flat();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&k| usable[k]).collect();
            let (loss, grad) = batch_gradients(&net, &batch)?;
            epoch_loss += loss * batch.len() as f64;
            let mut g = grad.params_flat();
            if let Some(max) = cfg.clip_norm {
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > max {
                    g.iter_mut().for_each(|v| *v *= max / norm);
                }
            }
            opt.update(&mut theta, &g, &active);
            net.set_params_flat(&theta)?;
        }
        let train_loss = epoch_loss / usable.len() as f64;
        let val_loss = series_loss(&net, val)?;
        history.records.push(EpochRecord { epoch, train_loss, val_loss });
        if !val_loss.is_finite() {
            history.stopped_early = true;
            break;
        }
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = Some(epoch);
            best = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }
    Ok((best, history))
}

/// Windows `train` per the configuration, then [`train_samples`].
pub fn train(net: &Network, train: &SparseSeries, val: &SparseSeries, cfg: &TrainingConfig) -> Result<(Network, TrainingHistory)> {
    cfg.validate()?;
    let samples = make_windows(train, cfg.window, cfg.stride, cfg.keep_unobserved_windows)?;
    train_samples(net, &samples, val, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::{ActivationKind, DenseLayer, LstmParams, Matrix, RecurrentLayer, SimpleRnnParams};
    use crate::training::init::{init_network, Architecture};
    use crate::training::masked_mse;

    fn linear_unit(wx: f64, wh: f64) -> Network {
        let p = SimpleRnnParams::new(
            Matrix::from_vec(1, 1, vec![wx]).unwrap(),
            Matrix::from_vec(1, 1, vec![wh]).unwrap(),
            vec![0.0],
            ActivationKind::Linear,
        )
        .unwrap();
        Network::new(RecurrentLayer::Simple(p), vec![]).unwrap()
    }

    fn decay_series(n: usize, a: f64) -> SparseSeries {
        let xs: Vec<f64> = (0..n).map(|k| ((k as f64) * 0.7).sin()).collect();
        let mut z = 0.0;
        let ys: Vec<f64> = xs.iter().map(|x| {
            z = a * z + (1.0 - a) * x;
            z
        })
        .collect();
        SparseSeries::from_dense(0, Matrix::column(&xs), &ys).unwrap()
    }

    #[test]
    fn small_gradient_step_does_not_increase_loss() {
        let net = linear_unit(0.2, 0.3);
        let s = decay_series(40, 0.8).as_sample();
        let (loss0, grad) = batch_gradients(&net, &[&s]).unwrap();
        let mut theta = net.params_flat();
        for (p, g) in theta.iter_mut().zip(grad.params_flat()) {
            *p -= 1e-3 * g;
        }
        let mut stepped = net.clone();
        stepped.set_params_flat(&theta).unwrap();
        let loss1 = masked_mse(&stepped.predict(&s.inputs, None).unwrap(), &s.targets, &s.mask).unwrap();
        assert!(loss1 <= loss0);
    }

    #[test]
    fn zero_epochs_returns_input_weights() {
        let net = linear_unit(0.2, 0.3);
        let s = decay_series(60, 0.8);
        let cfg = TrainingConfig { epochs: 0, window: 10, stride: 5, ..Default::default() };
        let (out, hist) = train(&net, &s, &s, &cfg).unwrap();
        assert_eq!(out, net);
        assert!(hist.records.is_empty());
    }

    #[test]
    fn freezing_keeps_recurrent_weights() {
        let mut net = init_network(&Architecture::lstm_regressor(1, 3), 1).unwrap();
        net.dense_mut()[0].weights.set(0, 0, 0.5);
        let s = decay_series(120, 0.9);
        let cfg = TrainingConfig {
            epochs: 3,
            window: 24,
            stride: 6,
            batch_size: 4,
            patience: 10,
            learning_rate: 0.01,
            freeze: FreezeSpec::DENSE_ONLY,
            ..Default::default()
        };
        let (out, hist) = train(&net, &s, &s, &cfg).unwrap();
        assert_eq!(out.recurrent(), net.recurrent());
        assert!(hist.best_epoch.is_some());
        assert_ne!(out.dense(), net.dense());
    }

    #[test]
    fn training_learns_a_decay() {
        // targets only in the second half of each aligned window, after the
        // zero start state has been forgotten
        let half_observed = |n: usize| {
            let mut s = decay_series(n, 0.5);
            for k in 0..n {
                if k % 24 < 12 {
                    s.mask[k] = false;
                    s.target[k] = f64::NAN;
                }
            }
            s
        };
        let net = linear_unit(0.0, 0.0);
        let train_s = half_observed(480);
        let val = decay_series(200, 0.5);
        let cfg = TrainingConfig {
            epochs: 300,
            window: 24,
            stride: 24,
            batch_size: 4,
            patience: 30,
            learning_rate: 0.02,
            ..Default::default()
        };
        let (out, hist) = train(&net, &train_s, &val, &cfg).unwrap();
        assert!(hist.best_val_loss < 1e-3 * hist.initial_val_loss, "{hist:?}");
        let p = out.params_flat();
        assert!((p[1] - 0.5).abs() < 0.05, "{p:?}");
    }

    #[test]
    fn early_stopping_restores_best_and_writes_csv() {
        let lstm = LstmParams::zeros(1, 1, ActivationKind::Tanh, ActivationKind::Tanh);
        let net = Network::new(RecurrentLayer::Lstm(lstm), vec![DenseLayer::zeros(1, 1, ActivationKind::Linear)]).unwrap();
        let s = decay_series(100, 0.5);
        let cfg = TrainingConfig { epochs: 50, window: 20, stride: 10, patience: 2, learning_rate: 0.5, ..Default::default() };
        let (out, hist) = train(&net, &s, &s, &cfg).unwrap();
        assert_eq!(series_loss(&out, &s).unwrap(), hist.best_val_loss);
        let mut buf = Vec::new();
        hist.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss\n"));
        assert_eq!(text.lines().count(), hist.records.len() + 1);
    }

    #[test]
    fn invalid_freeze_is_rejected() {
        let net = linear_unit(0.1, 0.1);
        let s = decay_series(50, 0.5);
        let cfg = TrainingConfig { window: 10, freeze: FreezeSpec::DENSE_ONLY, ..Default::default() };
        assert!(matches!(train(&net, &s, &s, &cfg), Err(Error::Config(_))));
    }
}
