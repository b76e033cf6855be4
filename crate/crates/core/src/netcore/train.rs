use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{bce_terms, NetError};
use crate::rng::{stream, stream_rng};

/// Rows of `(x, bid, target)` borrowed from a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub x: &'a [f64],
    pub dim: usize,
    pub bids: &'a [f64],
    pub targets: &'a [f64],
}

impl<'a> Samples<'a> {
    pub fn new(x: &'a [f64], dim: usize, bids: &'a [f64], targets: &'a [f64]) -> Result<Self, NetError> {
        if bids.len() != targets.len() || x.len() != dim * bids.len() {
            return Err(NetError::Argument(format!(
                "inconsistent sample lengths: {} features, {} bids, {} targets (dim {dim})",
                x.len(),
                bids.len(),
                targets.len()
            )));
        }
        Ok(Self {
            x,
            dim,
            bids,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// A probability model with a flat parameter vector and an exact gradient
/// of the per-sample binary cross-entropy.
pub trait Trainable {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// Probability of acceptance at `bid`.
    fn predict(&self, x: &[f64], bid: f64) -> f64;
    /// Adds the gradient of this sample's BCE, scaled by `weight`, into
    /// `grad`. Returns the predicted probability.
    fn accumulate_gradient(&self, x: &[f64], bid: f64, target: f64, weight: f64, grad: &mut [f64]) -> f64;
}

/// Mean BCE of a model over `samples`.
pub fn mean_bce<M: Trainable + ?Sized>(model: &M, samples: &Samples<'_>) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = (0..samples.len())
        .map(|i| bce_terms(model.predict(samples.row(i), samples.bids[i]), samples.targets[i]))
        .sum();
    total / samples.len() as f64
}

/// Mean BCE and its exact gradient over the listed rows.
pub fn loss_and_gradient<M: Trainable + ?Sized>(
    model: &M,
    samples: &Samples<'_>,
    rows: &[usize],
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.params().len()];
    let weight = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &i in rows {
        let p = model.accumulate_gradient(samples.row(i), samples.bids[i], samples.targets[i], weight, &mut grad);
        loss += bce_terms(p, samples.targets[i]);
    }
    (loss * weight, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.batch_size == 0 || self.steps == 0 || !(self.learning_rate > 0.0) {
            return Err(NetError::Argument(format!(
                "batch size, steps and learning rate must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Global-norm threshold for gradient clipping.
pub const CLIP_NORM: f64 = 10.0;
/// Steps between loss checkpoints.
pub const CHECKPOINT_EVERY: usize = 100;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub train_bce: f64,
    pub validation_bce: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub checkpoints: Vec<Checkpoint>,
    /// Step whose parameters were kept.
    pub selected_step: usize,
}

/// Runs `config.steps` Adam updates on shuffled minibatches.
///
/// Gradients are clipped to global norm [`CLIP_NORM`]. With a validation
/// set, the parameters at the checkpoint with the lowest validation BCE are
/// restored at the end; otherwise the final parameters are kept.
pub fn train<M: Trainable + ?Sized>(
    model: &mut M,
    data: &Samples<'_>,
    validation: Option<&Samples<'_>>,
    config: &TrainConfig,
) -> Result<TrainReport, NetError> {
    config.validate()?;
    if data.is_empty() {
        return Err(NetError::Argument("no training samples".into()));
    }
    let n = data.len();
    let batch = config.batch_size.min(n);
    let n_params = model.params().len();
    let mut rng = stream_rng(config.seed, stream::BATCHES);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut report = TrainReport {
        checkpoints: Vec::new(),
        selected_step: 0,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let validation = validation.filter(|v| !v.is_empty());
    if let Some(val) = validation {
        best = Some((mean_bce(model, val), model.params().to_vec()));
    }

    let mut rows = Vec::with_capacity(batch);
    for step in 1..=config.steps {
        rows.clear();
        while rows.len() < batch {
            if cursor == n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            rows.push(order[cursor]);
            cursor += 1;
        }
        let (loss, mut grad) = loss_and_gradient(model, data, &rows);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(NetError::Divergence { step });
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > CLIP_NORM {
            let scale = CLIP_NORM / norm;
            grad.iter_mut().for_each(|g| *g *= scale);
        }
        let t = step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let params = model.params_mut();
        for j in 0..n_params {
            m[j] = BETA1 * m[j] + (1.0 - BETA1) * grad[j];
            v[j] = BETA2 * v[j] + (1.0 - BETA2) * grad[j] * grad[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            params[j] -= config.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }

        if step % CHECKPOINT_EVERY == 0 || step == config.steps {
            let train_bce = mean_bce(model, data);
            if !train_bce.is_finite() {
                return Err(NetError::Divergence { step });
            }
            let validation_bce = validation.map(|val| mean_bce(model, val));
            report.checkpoints.push(Checkpoint {
                step,
                train_bce,
                validation_bce,
            });
            if let (Some(val_bce), Some((best_bce, best_params))) = (validation_bce, best.as_mut()) {
                if val_bce < *best_bce {
                    *best_bce = val_bce;
                    best_params.copy_from_slice(model.params());
                    report.selected_step = step;
                }
            }
        }
    }
    match best {
        Some((_, params)) => model.params_mut().copy_from_slice(&params),
        None => report.selected_step = config.steps,
    }
    Ok(report)
}
