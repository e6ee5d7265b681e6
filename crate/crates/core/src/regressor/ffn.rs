//! Feed-forward regression network trained from scratch.
//!
//! Hidden layers use the configured activation, the single output unit is
//! logistic so predictions always lie in `[0, 1]`. Loss is mean squared
//! error, optimized with mini-batch Adam. All parameters live in one flat
//! vector: for each layer, the `out x in` weight matrix (row-major) followed
//! by the `out` biases.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FfnConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_stop_patience: usize,
}

impl Default for FfnConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![20, 20],
            activation: Activation::Relu,
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 0,
            early_stop_patience: 10,
        }
    }
}

impl FfnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden_layers", "every layer needs >= 1 unit"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate", "must be > 0"));
        }
        Ok(())
    }
}

/// Loss history of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean of the mini-batch losses seen during each epoch.
    pub train_loss: Vec<f64>,
    /// Full-pass validation MSE after each epoch.
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    /// FNV-1a hash of the restored parameters, as 16 hex digits.
    pub snapshot: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnModel {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl FfnModel {
    /// Fan-in scaled symmetric uniform weights, zero biases.
    pub fn init(n_inputs: usize, hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(n_inputs);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(&sizes));
        for w in sizes.windows(2) {
            let (fan_in, out) = (w[0].max(1), w[1]);
            let gain = match activation {
                Activation::Relu => 6.0,
                Activation::Tanh => 3.0,
            };
            let limit = (gain / fan_in as f64).sqrt();
            params.extend((0..out * w[0]).map(|_| rng.gen_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, out));
        }
        Self {
            sizes,
            activation,
            params,
        }
    }

    pub fn from_parts(sizes: Vec<usize>, activation: Activation, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || *sizes.last().unwrap() != 1 || sizes.contains(&0) {
            return Err(Error::Format(format!("invalid layer sizes {sizes:?}")));
        }
        if params.len() != param_count(&sizes) {
            return Err(Error::Format(format!(
                "expected {} parameters for layers {sizes:?}, got {}",
                param_count(&sizes),
                params.len()
            )));
        }
        Ok(Self {
            sizes,
            activation,
            params,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Forward pass keeping every layer's pre-activations and outputs.
    fn forward_trace(&self, x: &[f64], zs: &mut Vec<Vec<f64>>, acts: &mut Vec<Vec<f64>>) -> f64 {
        zs.clear();
        acts.clear();
        acts.push(x.to_vec());
        let n_layers = self.sizes.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + out * fan_in];
            let b = &self.params[off + out * fan_in..off + out * fan_in + out];
            off += out * fan_in + out;
            let input = acts.last().unwrap();
            let z: Vec<f64> = (0..out)
                .map(|o| b[o] + dot(&w[o * fan_in..(o + 1) * fan_in], input))
                .collect();
            let a = if l + 1 == n_layers {
                z.iter().map(|&v| logistic(v)).collect()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            zs.push(z);
            acts.push(a);
        }
        acts.last().unwrap()[0]
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let n_layers = self.sizes.len() - 1;
        let mut input = x.to_vec();
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + out * fan_in];
            let b = &self.params[off + out * fan_in..off + out * fan_in + out];
            off += out * fan_in + out;
            input = (0..out)
                .map(|o| {
                    let z = b[o] + dot(&w[o * fan_in..(o + 1) * fan_in], &input);
                    if l + 1 == n_layers {
                        logistic(z)
                    } else {
                        self.activation.apply(z)
                    }
                })
                .collect();
        }
        input[0]
    }

    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.cols() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                found: rows.cols(),
            });
        }
        Ok(rows.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    pub fn mse(&self, rows: &Matrix, targets: &[f64]) -> f64 {
        if targets.is_empty() {
            return 0.0;
        }
        rows.iter_rows()
            .zip(targets)
            .map(|(r, y)| (self.predict_row(r) - y).powi(2))
            .sum::<f64>()
            / targets.len() as f64
    }

    /// Mean squared error over `rows` and its gradient with respect to
    /// [`params`](Self::params).
    pub fn loss_gradient(&self, rows: &Matrix, targets: &[f64]) -> (f64, Vec<f64>) {
        let idx: Vec<usize> = (0..rows.rows()).collect();
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(rows, targets, &idx, &mut grad);
        (loss, grad)
    }

    /// Writes the batch-mean gradient into `grad` and returns the batch MSE.
    fn accumulate_gradient(&self, rows: &Matrix, targets: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n_layers = self.sizes.len() - 1;
        let offsets: Vec<usize> = self
            .sizes
            .windows(2)
            .scan(0, |acc, w| {
                let o = *acc;
                *acc += w[1] * w[0] + w[1];
                Some(o)
            })
            .collect();
        let scale = 1.0 / batch.len() as f64;
        let mut zs = Vec::with_capacity(n_layers);
        let mut acts = Vec::with_capacity(n_layers + 1);
        let mut loss = 0.0;
        for &i in batch {
            let y_hat = self.forward_trace(rows.row(i), &mut zs, &mut acts);
            let err = y_hat - targets[i];
            loss += err * err;
            // d(loss)/dz at the logistic output
            let mut delta = vec![2.0 * err * scale * y_hat * (1.0 - y_hat)];
            for l in (0..n_layers).rev() {
                let (fan_in, out) = (self.sizes[l], self.sizes[l + 1]);
                let off = offsets[l];
                let input = &acts[l];
                for o in 0..out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let gw = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
                    for (g, x) in gw.iter_mut().zip(input) {
                        *g += d * x;
                    }
                    grad[off + out * fan_in + o] += d;
                }
                if l > 0 {
                    let w = &self.params[off..off + out * fan_in];
                    let mut prev = vec![0.0; fan_in];
                    for o in 0..out {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        for (p, wv) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                            *p += d * wv;
                        }
                    }
                    for (k, p) in prev.iter_mut().enumerate() {
                        *p *= self.activation.derivative(zs[l - 1][k], acts[l][k]);
                    }
                    delta = prev;
                }
            }
        }
        loss * scale
    }

    pub fn snapshot_id(&self) -> String {
        format!("{:016x}", fnv1a(&self.params))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn fnv1a(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Trains a network on `(train, train_y)` with early stopping on
/// `(val, val_y)`; the returned model carries the best-validation parameters.
/// Fully determined by the data and `config.seed`.
pub fn fit_ffn(
    name: &str,
    train: &Matrix,
    train_y: &[f64],
    val: &Matrix,
    val_y: &[f64],
    config: &FfnConfig,
) -> Result<(FfnModel, TrainReport)> {
    config.validate()?;
    if train.rows() == 0 || val.rows() == 0 {
        return Err(Error::InvalidData(format!(
            "`{name}` needs non-empty train and validation splits"
        )));
    }
    if train.rows() != train_y.len() || val.rows() != val_y.len() {
        return Err(Error::InvalidData("row and target counts differ".into()));
    }
    if val.cols() != train.cols() {
        return Err(Error::DimensionMismatch {
            expected: train.cols(),
            found: val.cols(),
        });
    }
    let mut model = FfnModel::init(train.cols(), &config.hidden_layers, config.activation, config.seed);
    // separate stream for shuffling so init and order are independent
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = Adam::new(model.params.len(), config.learning_rate);
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..train.rows()).collect();

    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.params.clone());
    let mut wait = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for batch in order.chunks(config.batch_size) {
            let loss = model.accumulate_gradient(train, train_y, batch, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    model: name.to_string(),
                    epoch,
                });
            }
            adam.step(&mut model.params, &grad);
            sum += loss;
            batches += 1;
        }
        let v = model.mse(val, val_y);
        if !v.is_finite() {
            return Err(Error::Diverged {
                model: name.to_string(),
                epoch,
            });
        }
        train_loss.push(sum / batches as f64);
        val_loss.push(v);
        if v < best.0 {
            best = (v, epoch, model.params.clone());
            wait = 0;
        } else {
            wait += 1;
            if wait > config.early_stop_patience {
                break;
            }
        }
        log::debug!("{name} epoch {epoch}: train {:.6} val {v:.6}", sum / batches as f64);
    }
    model.params = best.2;
    let report = TrainReport {
        train_loss,
        val_loss,
        best_epoch: best.1,
        snapshot: model.snapshot_id(),
    };
    Ok((model, report))
}
