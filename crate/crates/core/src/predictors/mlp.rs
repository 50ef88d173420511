//! Fully connected ReLU network trained by seeded mini-batch Adam.
//!
//! Inputs are standardized per feature and targets per output before
//! training; the affine maps are stored with the model so `predict` works on
//! raw covariates. Positive target rescaling leaves pinball minimizers
//! (quantiles) equivariant, so the same pipeline serves both losses.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, PtcError, Result};
use crate::linalg::{axpy, Matrix};
use crate::rng::StreamKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(PtcError::ConfigInvalid("MLP layer sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(PtcError::ConfigInvalid("MLP learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(PtcError::ConfigInvalid("MLP batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Squared,
    /// `ρ_α(u) = α·u⁺ + (1−α)·(−u)⁺` with `u = target − prediction`.
    Pinball(f64),
}

impl Loss {
    fn value(self, pred: f64, target: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (pred - target) * (pred - target),
            Loss::Pinball(a) => super::pinball(target - pred, a),
        }
    }

    fn grad(self, pred: f64, target: f64) -> f64 {
        match self {
            Loss::Squared => pred - target,
            Loss::Pinball(a) => {
                let u = target - pred;
                if u > 0.0 {
                    -a
                } else if u < 0.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
        }
    }
}

/// One dense layer; `weights` is in×out so a batch forward is `X·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: Vec<f64>,
    y_scale: Vec<f64>,
    losses: Vec<f64>,
}

fn standardize_stats(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let t = m.rows().max(1) as f64;
    let k = m.cols();
    let mut mean = vec![0.0; k];
    for r in m.row_iter() {
        axpy(1.0, r, &mut mean);
    }
    mean.iter_mut().for_each(|v| *v /= t);
    let mut var = vec![0.0; k];
    for r in m.row_iter() {
        for j in 0..k {
            var[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
        }
    }
    let scale = var
        .into_iter()
        .map(|v| {
            let s = (v / t).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Forward activations for a batch: `acts[0]` is the input, `acts[L]` the output.
fn forward(layers: &[Layer], x: &Matrix) -> Vec<Matrix> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.clone());
    for (l, layer) in layers.iter().enumerate() {
        let mut out = acts[l].matmul(&layer.weights).expect("layer shapes");
        let last = l + 1 == layers.len();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (v, b) in row.iter_mut().zip(&layer.bias) {
                *v += b;
                if !last && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        acts.push(out);
    }
    acts
}

/// Mean loss and its gradient with respect to every layer parameter.
fn backward(layers: &[Layer], x: &Matrix, y: &Matrix, loss: Loss) -> (f64, Vec<Layer>) {
    let acts = forward(layers, x);
    let bsz = x.rows() as f64;
    let out = acts.last().expect("output layer");
    let mut delta = Matrix::zeros(out.rows(), out.cols());
    let mut total = 0.0;
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            total += loss.value(out[(i, j)], y[(i, j)]);
            delta[(i, j)] = loss.grad(out[(i, j)], y[(i, j)]) / bsz;
        }
    }
    let mut grads: Vec<Layer> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let input = &acts[l];
        let gw = input.transpose().matmul(&delta).expect("grad shapes");
        let mut gb = vec![0.0; delta.cols()];
        for r in delta.row_iter() {
            axpy(1.0, r, &mut gb);
        }
        if l > 0 {
            let mut prev = delta.matmul(&layers[l].weights.transpose()).expect("backprop shapes");
            for i in 0..prev.rows() {
                for j in 0..prev.cols() {
                    if input[(i, j)] <= 0.0 {
                        prev[(i, j)] = 0.0;
                    }
                }
            }
            delta = prev;
        }
        grads.push(Layer { weights: gw, bias: gb });
    }
    grads.reverse();
    (total / bsz, grads)
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut v = Vec::new();
    for l in layers {
        v.extend_from_slice(l.weights.as_slice());
        v.extend_from_slice(&l.bias);
    }
    v
}

fn unflatten_into(layers: &mut [Layer], params: &[f64]) {
    let mut k = 0;
    for l in layers.iter_mut() {
        let (r, c) = (l.weights.rows(), l.weights.cols());
        l.weights = Matrix::from_vec(r, c, params[k..k + r * c].to_vec()).expect("sizes");
        k += r * c;
        let nb = l.bias.len();
        l.bias.copy_from_slice(&params[k..k + nb]);
        k += nb;
    }
}

fn init_layers(sizes: &[usize], key: StreamKey) -> Vec<Layer> {
    let mut rng = key.rng();
    sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            Layer {
                weights: Matrix::from_vec(fan_in, fan_out, data).expect("sizes"),
                bias: vec![0.0; fan_out],
            }
        })
        .collect()
}

impl MlpModel {
    /// Network with explicit layers and identity input/output scaling.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| PtcError::ConfigInvalid("MLP needs at least one layer".into()))?;
        let d = first.weights.rows();
        for w in layers.windows(2) {
            check_dim("layer chaining", w[0].weights.cols(), w[1].weights.rows())?;
        }
        for l in &layers {
            check_dim("bias length", l.weights.cols(), l.bias.len())?;
        }
        let n = layers.last().map(|l| l.bias.len()).unwrap_or(0);
        Ok(MlpModel {
            layers,
            x_mean: vec![0.0; d],
            x_scale: vec![1.0; d],
            y_mean: vec![0.0; n],
            y_scale: vec![1.0; n],
            losses: Vec::new(),
        })
    }

    pub(crate) fn from_parts(
        layers: Vec<Layer>,
        x_mean: Vec<f64>,
        x_scale: Vec<f64>,
        y_mean: Vec<f64>,
        y_scale: Vec<f64>,
        losses: Vec<f64>,
    ) -> Result<Self> {
        let mut m = MlpModel::from_layers(layers)?;
        check_dim("input mean", m.x_mean.len(), x_mean.len())?;
        check_dim("input scale", m.x_scale.len(), x_scale.len())?;
        check_dim("output mean", m.y_mean.len(), y_mean.len())?;
        check_dim("output scale", m.y_scale.len(), y_scale.len())?;
        m.x_mean = x_mean;
        m.x_scale = x_scale;
        m.y_mean = y_mean;
        m.y_scale = y_scale;
        m.losses = losses;
        Ok(m)
    }

    pub fn fit(z: &Matrix, y: &Matrix, cfg: &MlpConfig, loss: Loss, seed: u64) -> Result<Self> {
        cfg.validate()?;
        check_dim("training rows", z.rows(), y.rows())?;
        if z.rows() == 0 {
            return Err(PtcError::TooFewSamples { needed: 1, have: 0 });
        }
        let (x_mean, x_scale) = standardize_stats(z);
        let (y_mean, y_scale) = standardize_stats(y);
        let xs = scale_rows(z, &x_mean, &x_scale);
        let ys = scale_rows(y, &y_mean, &y_scale);

        let mut sizes = vec![z.cols()];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(y.cols());
        let key = StreamKey::new(seed, "mlp");
        let mut layers = init_layers(&sizes, key.label("init"));
        let mut params = flatten(&layers);
        let mut m1 = vec![0.0; params.len()];
        let mut m2 = vec![0.0; params.len()];
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut step = 0i32;
        let mut rng = key.label("shuffle").rng();
        let mut order: Vec<usize> = (0..z.rows()).collect();
        let mut losses = Vec::with_capacity(cfg.epochs);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let bx = xs.select_rows(chunk);
                let by = ys.select_rows(chunk);
                let (l, grads) = backward(&layers, &bx, &by, loss);
                epoch_loss += l * chunk.len() as f64;
                let g = flatten(&grads);
                step += 1;
                let c1 = 1.0 - b1.powi(step);
                let c2 = 1.0 - b2.powi(step);
                for k in 0..params.len() {
                    m1[k] = b1 * m1[k] + (1.0 - b1) * g[k];
                    m2[k] = b2 * m2[k] + (1.0 - b2) * g[k] * g[k];
                    params[k] -= cfg.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
                }
                unflatten_into(&mut layers, &params);
            }
            losses.push(epoch_loss / z.rows() as f64);
        }
        Ok(MlpModel {
            layers,
            x_mean,
            x_scale,
            y_mean,
            y_scale,
            losses,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_scaling(&self) -> (&[f64], &[f64]) {
        (&self.x_mean, &self.x_scale)
    }

    pub fn output_scaling(&self) -> (&[f64], &[f64]) {
        (&self.y_mean, &self.y_scale)
    }

    /// Mean training loss per epoch (on standardized targets).
    pub fn training_losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn input_dim(&self) -> usize {
        self.x_mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.y_mean.len()
    }

    pub fn predict(&self, z: &[f64]) -> Vec<f64> {
        let mut h: Vec<f64> = z
            .iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = layer.bias.clone();
            for (hi, row) in h.iter().zip(layer.weights.row_iter()) {
                if *hi != 0.0 {
                    axpy(*hi, row, &mut out);
                }
            }
            if l != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            h = out;
        }
        h.iter()
            .zip(self.y_mean.iter().zip(&self.y_scale))
            .map(|(v, (m, s))| m + s * v)
            .collect()
    }

    /// Flattened parameters (per layer: weights row-major, then bias).
    pub fn params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim("parameter count", self.params().len(), params.len())?;
        unflatten_into(&mut self.layers, params);
        Ok(())
    }

    /// Mean loss and flattened gradient on raw network inputs/outputs
    /// (no standardization applied).
    pub fn loss_and_grad(&self, x: &Matrix, y: &Matrix, loss: Loss) -> (f64, Vec<f64>) {
        let (l, g) = backward(&self.layers, x, y, loss);
        (l, flatten(&g))
    }
}

fn scale_rows(m: &Matrix, mean: &[f64], scale: &[f64]) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = (*v - mean[j]) / scale[j];
        }
    }
    out
}
