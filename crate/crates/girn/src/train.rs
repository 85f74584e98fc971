//! Full-batch gradient-descent training with binary cross-entropy.
//!
//! Training drives the symmetrized model to near-zero loss, the
//! interpolation regime where margin-maximization stationarity
//! approximately holds. [`kkt_residual`] quantifies how close a trained
//! parameter vector is to a nonnegative combination of the per-sample
//! parameter gradients, which is the quantity the stationarity-based
//! reconstruction attack exploits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::model::InvariantModel;

/// Samples grouped per parallel task; fixed so the ordered reduction is
/// identical for any thread count.
const GRAD_CHUNK: usize = 8;

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Stop early once the mean loss falls below this.
    pub target_loss: f64,
    pub seed: u64,
    /// History granularity (epoch 0 and the final epoch are always logged).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 20_000,
            target_loss: 1e-5,
            seed: 0,
            log_every: 100,
        }
    }
}

/// A binary-labeled image dataset; labels are exactly `+1` or `-1`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub samples: Vec<ImageTensor>,
    pub labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<ImageTensor>, labels: Vec<f64>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::LabelCountMismatch {
                samples: samples.len(),
                labels: labels.len(),
            });
        }
        for &y in &labels {
            if y != 1.0 && y != -1.0 {
                return Err(Error::Unsupported {
                    what: "label",
                    detail: format!("{y} (must be +1 or -1)"),
                });
            }
        }
        Ok(LabeledDataset { samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One logged row of training history.
#[derive(Debug, Clone, Copy)]
pub struct HistoryRow {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    /// `min_i y_i phi(x_i)` — the unnormalized margin.
    pub min_margin: f64,
}

/// Log-sum form of binary cross-entropy, `log(1 + exp(-t))`, computed
/// without overflow for large `|t|`.
fn softplus_neg(t: f64) -> f64 {
    if t > 30.0 {
        (-t).exp().ln_1p()
    } else if t < -30.0 {
        -t
    } else {
        (-t).exp().ln_1p()
    }
}

/// Mean binary cross-entropy `(1/n) sum_i log(1 + exp(-y_i phi(x_i)))`.
pub fn bce_loss(model: &InvariantModel, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (x, &y) in dataset.samples.iter().zip(&dataset.labels) {
        total += softplus_neg(y * model.forward(x)?);
    }
    Ok(total / dataset.len() as f64)
}

fn epoch_stats(outputs: &[f64], labels: &[f64]) -> (f64, f64, f64) {
    let n = outputs.len() as f64;
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut min_margin = f64::INFINITY;
    for (&phi, &y) in outputs.iter().zip(labels) {
        let margin = y * phi;
        loss += softplus_neg(margin);
        if margin > 0.0 {
            correct += 1;
        }
        min_margin = min_margin.min(margin);
    }
    (loss / n, correct as f64 / n, min_margin)
}

/// Full-batch gradient descent on the model parameters.
///
/// Per-sample gradient work runs in parallel over fixed-size chunks; the
/// reduction into the update is sequential in sample order, so the result is
/// bit-identical for any thread count. Stops at `epochs` or once the loss
/// drops below `target_loss`; a non-finite loss aborts with the epoch index.
pub fn train(
    model: &mut InvariantModel,
    dataset: &LabeledDataset,
    config: &TrainConfig,
) -> Result<Vec<HistoryRow>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.len();
    let p = model.params.len();
    let mut history = Vec::new();

    for epoch in 0..config.epochs {
        // forward + per-sample scaled gradients, chunked for determinism
        let chunks: Vec<(Vec<f64>, Vec<f64>)> = dataset
            .samples
            .par_chunks(GRAD_CHUNK)
            .zip(dataset.labels.par_chunks(GRAD_CHUNK))
            .map(|(xs, ys)| {
                let mut grad = vec![0.0; p];
                let mut outs = Vec::with_capacity(xs.len());
                for (x, &y) in xs.iter().zip(ys) {
                    let phi = model.forward(x).expect("dims checked at entry");
                    outs.push(phi);
                    // d/dtheta softplus(-y phi) = -y sigma(-y phi) dphi/dtheta
                    let margin = y * phi;
                    let sig = 1.0 / (1.0 + margin.exp());
                    let scale = -y * sig / n as f64;
                    let gp = model.grad_params_sym(x).expect("dims checked");
                    for (g, v) in grad.iter_mut().zip(&gp) {
                        *g += scale * v;
                    }
                }
                (outs, grad)
            })
            .collect();

        let mut outputs = Vec::with_capacity(n);
        let mut grad = vec![0.0; p];
        for (outs, g) in &chunks {
            outputs.extend_from_slice(outs);
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }

        let (loss, accuracy, min_margin) = epoch_stats(&outputs, &dataset.labels);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        if epoch % config.log_every.max(1) == 0 {
            history.push(HistoryRow {
                epoch,
                loss,
                accuracy,
                min_margin,
            });
        }
        if loss < config.target_loss {
            history.push(HistoryRow {
                epoch,
                loss,
                accuracy,
                min_margin,
            });
            return Ok(history);
        }

        for (t, g) in model.params.data.iter_mut().zip(&grad) {
            *t -= config.learning_rate * g;
        }
    }

    // final measurement after the last update
    let loss = bce_loss(model, dataset)?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
        });
    }
    let mut outputs = Vec::with_capacity(n);
    for x in &dataset.samples {
        outputs.push(model.forward(x)?);
    }
    let (loss, accuracy, min_margin) = epoch_stats(&outputs, &dataset.labels);
    let _ = loss;
    history.push(HistoryRow {
        epoch: config.epochs,
        loss: bce_loss(model, dataset)?,
        accuracy,
        min_margin,
    });
    Ok(history)
}

/// Diagnostic fit of the stationarity condition: solve
/// `min_{lambda >= 0} || theta - sum_i lambda_i y_i grad_params_sym(x_i) ||^2`
/// by projected gradient descent and report the relative residual
/// `|| theta - A lambda || / || theta ||` together with the duals.
pub fn kkt_residual(model: &InvariantModel, dataset: &LabeledDataset) -> Result<(f64, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.len();
    let p = model.params.len();
    let theta = &model.params.data;

    // columns a_i = y_i grad_params_sym(x_i)
    let columns: Vec<Vec<f64>> = dataset
        .samples
        .par_iter()
        .zip(&dataset.labels)
        .map(|(x, &y)| {
            let mut g = model.grad_params_sym(x).expect("dims checked");
            for v in &mut g {
                *v *= y;
            }
            g
        })
        .collect();

    // Gram matrix and A^T theta
    let mut gram = vec![0.0; n * n];
    let mut at_theta = vec![0.0; n];
    for i in 0..n {
        at_theta[i] = columns[i].iter().zip(theta).map(|(a, t)| a * t).sum();
        for j in i..n {
            let dot: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
            gram[i * n + j] = dot;
            gram[j * n + i] = dot;
        }
    }

    // Lipschitz constant of the gradient from a trace bound
    let trace: f64 = (0..n).map(|i| gram[i * n + i]).sum();
    let step = if trace > 0.0 { 1.0 / (2.0 * trace) } else { 1.0 };

    let mut lambda = vec![0.0; n];
    for _ in 0..5000 {
        // grad f = 2 (G lambda - A^T theta)
        for i in 0..n {
            let gl: f64 = (0..n).map(|j| gram[i * n + j] * lambda[j]).sum();
            let g = 2.0 * (gl - at_theta[i]);
            lambda[i] = (lambda[i] - step * g).max(0.0);
        }
    }

    let mut residual_sq = 0.0;
    for k in 0..p {
        let fitted: f64 = (0..n).map(|i| lambda[i] * columns[i][k]).sum();
        let r = theta[k] - fitted;
        residual_sq += r * r;
    }
    let theta_norm = model.params.norm();
    let rel = if theta_norm > 0.0 {
        residual_sq.sqrt() / theta_norm
    } else {
        0.0
    };
    Ok((rel, lambda))
}
