//! Sparse linear models trained by mini-batch gradient descent.
//!
//! Both objectives are mean cross-entropy plus `l2/2 * ||W||^2` (biases are
//! not penalized). The step size in epoch `e` (1-based) is
//! `learning_rate / sqrt(e)`. Weights are stored as `scale * v` so the L2
//! shrink is O(1) per step instead of O(dim).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 10,
            batch_size: 256,
            l2: 1e-6,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be a positive number"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be >= 1"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("l2 must be >= 0"));
        }
        Ok(())
    }

    fn step_size(&self, epoch: usize) -> f64 {
        self.learning_rate / (epoch as f64).sqrt()
    }
}

/// Row access for training data that is assembled on demand.
pub(crate) trait Rows {
    fn len(&self) -> usize;
    fn fill(&self, i: usize, buf: &mut Vec<(u32, f64)>);
}

impl Rows for [FeatureVector] {
    fn len(&self) -> usize {
        <[FeatureVector]>::len(self)
    }

    fn fill(&self, i: usize, buf: &mut Vec<(u32, f64)>) {
        buf.clear();
        buf.extend_from_slice(&self[i].entries);
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binary cross-entropy of logit `z` against `y`.
fn logistic_loss(z: f64, y: bool) -> f64 {
    if y {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// d(loss)/dz for the logistic loss.
fn logistic_dz(z: f64, y: bool) -> f64 {
    sigmoid(z) - f64::from(u8::from(y))
}

/// Softmax probabilities and log-sum-exp of `z`, in place.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
    m + s.ln()
}

fn sq_norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum()
}

/// Regularized binary objective with its gradient `(J, dJ/dw, dJ/db)`.
pub fn logistic_objective(
    w: &[f64],
    b: f64,
    xs: &[FeatureVector],
    ys: &[bool],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut gw: Vec<f64> = w.iter().map(|wi| l2 * wi).collect();
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z = x.dot(w) + b;
        loss += logistic_loss(z, y);
        let g = logistic_dz(z, y) / n;
        gb += g;
        for &(j, v) in &x.entries {
            gw[j as usize] += g * v;
        }
    }
    (loss / n + 0.5 * l2 * sq_norm(w), gw, gb)
}

/// Regularized softmax objective and gradient. `w` is laid out feature-major:
/// the weight of feature `j` for class `c` is `w[j * k + c]`.
pub fn softmax_objective(
    w: &[f64],
    b: &[f64],
    xs: &[FeatureVector],
    ys: &[usize],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let k = b.len();
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut gw: Vec<f64> = w.iter().map(|wi| l2 * wi).collect();
    let mut gb = vec![0.0; k];
    let mut z = vec![0.0; k];
    for (x, &y) in xs.iter().zip(ys) {
        z.copy_from_slice(b);
        for &(j, v) in &x.entries {
            let row = &w[j as usize * k..(j as usize + 1) * k];
            for (zc, wc) in z.iter_mut().zip(row) {
                *zc += wc * v;
            }
        }
        let zy = z[y];
        let lse = softmax_in_place(&mut z);
        loss += lse - zy;
        z[y] -= 1.0;
        for c in 0..k {
            gb[c] += z[c] / n;
        }
        for &(j, v) in &x.entries {
            for c in 0..k {
                gw[j as usize * k + c] += z[c] * v / n;
            }
        }
    }
    (loss / n + 0.5 * l2 * sq_norm(w), gw, gb)
}

/// `scale * v` weight storage.
struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
}

impl ScaledWeights {
    fn zeros(len: usize) -> Self {
        ScaledWeights {
            v: vec![0.0; len],
            scale: 1.0,
        }
    }

    fn shrink(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale < 1e-6 {
            for x in &mut self.v {
                *x *= self.scale;
            }
            self.scale = 1.0;
        }
    }

    fn into_dense(self) -> Vec<f64> {
        let s = self.scale;
        self.v.into_iter().map(|x| x * s).collect()
    }
}

pub(crate) struct BinaryFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Objective at initialization and after every epoch.
    pub loss_history: Vec<f64>,
}

fn epoch_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

fn check_finite(loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::numeric("training diverged (non-finite loss); lower the learning rate"))
    }
}

type Row = Vec<(u32, f64)>;

pub(crate) fn fit_logistic<R: Rows + ?Sized>(
    rows: &R,
    labels: &[bool],
    dim: usize,
    cfg: &TrainConfig,
) -> Result<BinaryFit> {
    cfg.validate()?;
    let n = rows.len();
    debug_assert_eq!(labels.len(), n);
    let mut w = ScaledWeights::zeros(dim);
    let mut bias = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut buf = Vec::new();

    let objective = |w: &ScaledWeights, bias: f64, buf: &mut Vec<(u32, f64)>| {
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            rows.fill(i, buf);
            let z = w.scale * buf.iter().map(|&(j, v)| w.v[j as usize] * v).sum::<f64>() + bias;
            loss += logistic_loss(z, y);
        }
        loss / n as f64 + 0.5 * cfg.l2 * w.scale * w.scale * sq_norm(&w.v)
    };

    let mut loss_history = vec![objective(&w, bias, &mut buf)];
    let mut batch: Vec<(Vec<(u32, f64)>, f64)> = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.epochs {
        let eta = cfg.step_size(epoch);
        for chunk in epoch_order(n, &mut rng).chunks(cfg.batch_size) {
            batch.clear();
            for &i in chunk {
                rows.fill(i, &mut buf);
                let z = w.scale * buf.iter().map(|&(j, v)| w.v[j as usize] * v).sum::<f64>() + bias;
                batch.push((buf.clone(), logistic_dz(z, labels[i])));
            }
            let m = chunk.len() as f64;
            bias -= eta * batch.iter().map(|b| b.1).sum::<f64>() / m;
            w.shrink(1.0 - eta * cfg.l2);
            let step = eta / (m * w.scale);
            for (x, g) in &batch {
                for &(j, v) in x {
                    w.v[j as usize] -= step * g * v;
                }
            }
        }
        let loss = objective(&w, bias, &mut buf);
        check_finite(loss)?;
        loss_history.push(loss);
    }
    Ok(BinaryFit {
        weights: w.into_dense(),
        bias,
        loss_history,
    })
}

pub(crate) struct SoftmaxFit {
    /// Feature-major, `dim * n_classes`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub loss_history: Vec<f64>,
}

pub(crate) fn fit_softmax<R: Rows + ?Sized>(
    rows: &R,
    labels: &[usize],
    n_classes: usize,
    dim: usize,
    cfg: &TrainConfig,
) -> Result<SoftmaxFit> {
    cfg.validate()?;
    let k = n_classes;
    let n = rows.len();
    let mut w = ScaledWeights::zeros(dim * k);
    let mut bias = vec![0.0; k];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut buf = Vec::new();

    let logits = |w: &ScaledWeights, bias: &[f64], x: &[(u32, f64)], z: &mut [f64]| {
        z.fill(0.0);
        for &(j, v) in x {
            let row = &w.v[j as usize * k..(j as usize + 1) * k];
            for (zc, wc) in z.iter_mut().zip(row) {
                *zc += wc * v;
            }
        }
        for (zc, bc) in z.iter_mut().zip(bias) {
            *zc = *zc * w.scale + bc;
        }
    };
    let objective = |w: &ScaledWeights, bias: &[f64], buf: &mut Vec<(u32, f64)>| {
        let mut z = vec![0.0; k];
        let mut loss = 0.0;
        for i in 0..n {
            rows.fill(i, buf);
            logits(w, bias, buf, &mut z);
            let zy = z[labels[i]];
            loss += softmax_in_place(&mut z) - zy;
        }
        loss / n as f64 + 0.5 * cfg.l2 * w.scale * w.scale * sq_norm(&w.v)
    };

    let mut loss_history = vec![objective(&w, &bias, &mut buf)];
    let mut batch: Vec<(Row, Vec<f64>)> = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.epochs {
        let eta = cfg.step_size(epoch);
        for chunk in epoch_order(n, &mut rng).chunks(cfg.batch_size) {
            batch.clear();
            for &i in chunk {
                rows.fill(i, &mut buf);
                let mut z = vec![0.0; k];
                logits(&w, &bias, &buf, &mut z);
                softmax_in_place(&mut z);
                z[labels[i]] -= 1.0;
                batch.push((buf.clone(), z));
            }
            let m = chunk.len() as f64;
            for (_, g) in &batch {
                for c in 0..k {
                    bias[c] -= eta * g[c] / m;
                }
            }
            w.shrink(1.0 - eta * cfg.l2);
            let step = eta / (m * w.scale);
            for (x, g) in &batch {
                for &(j, v) in x {
                    let row = &mut w.v[j as usize * k..(j as usize + 1) * k];
                    for (wc, gc) in row.iter_mut().zip(g) {
                        *wc -= step * gc * v;
                    }
                }
            }
        }
        let loss = objective(&w, &bias, &mut buf);
        check_finite(loss)?;
        loss_history.push(loss);
    }
    Ok(SoftmaxFit {
        weights: w.into_dense(),
        bias,
        loss_history,
    })
}
