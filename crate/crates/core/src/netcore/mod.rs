//! A small differentiable-computation engine: dense and varying-coefficient
//! layers, binary cross-entropy, exact reverse-mode gradients and an Adam
//! trainer with gradient clipping and validation checkpointing.

mod network;
mod train;

pub use network::{sigmoid, Activation, Architecture, DenseNetwork, GradientAt, LayerShape, Trace, OUTPUT_FLOOR};
pub use train::{
    loss_and_gradient, mean_bce, train, Checkpoint, Samples, TrainConfig, TrainReport, Trainable,
    CHECKPOINT_EVERY, CLIP_NORM,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("training diverged at step {step}: non-finite loss")]
    Divergence { step: usize },
}

/// Predictions are clipped this far from 0 and 1 inside the loss.
pub const BCE_CLIP: f64 = 1e-7;

#[inline]
pub(crate) fn bce_terms(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean binary cross-entropy.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> Result<f64, NetError> {
    if pred.len() != target.len() {
        return Err(NetError::Argument(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(target).map(|(&p, &y)| bce_terms(p, y)).sum::<f64>() / pred.len() as f64)
}

/// Flat parameter array with the architecture needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSnapshot {
    pub architecture: Vec<Architecture>,
    pub params: Vec<f64>,
}

impl ParameterSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        serde_json::from_str(text).map_err(|e| NetError::Argument(e.to_string()))
    }
}

/// A single network trained on `[x, bid]` with a sigmoid output.
impl Trainable for DenseNetwork {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn predict(&self, x: &[f64], bid: f64) -> f64 {
        let input = input_with_bid(&self.architecture, x, bid);
        self.architecture.forward(&self.params, &input, bid, &[1.0]).output()[0]
    }

    fn accumulate_gradient(&self, x: &[f64], bid: f64, target: f64, weight: f64, grad: &mut [f64]) -> f64 {
        let input = input_with_bid(&self.architecture, x, bid);
        let trace = self.architecture.forward(&self.params, &input, bid, &[1.0]);
        let p = trace.output()[0];
        self.architecture
            .backward(&self.params, &trace, &[weight * (p - target)], GradientAt::Logit, &[1.0], grad);
        p
    }
}

/// Without an explicit bid layer, the bid is appended as the last input.
fn input_with_bid(arch: &Architecture, x: &[f64], bid: f64) -> Vec<f64> {
    let mut input = Vec::with_capacity(x.len() + 1);
    input.extend_from_slice(x);
    if arch.bid_input_at.is_none() {
        input.push(bid);
    }
    input
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn bce_reference_values() {
        assert!(bce_loss(&[1.0, 1.0], &[1.0, 1.0]).unwrap() < 1e-6);
        assert!((bce_loss(&[0.5; 4], &[1.0, 0.0, 0.0, 1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let v = bce_loss(&[0.8, 0.3], &[1.0, 0.0]).unwrap();
        assert!((v - 0.289_909_247_626_471_1).abs() < 1e-12, "{v}");
        assert!(bce_loss(&[0.2], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sigmoid_unit_logit_gradient_is_residual() {
        let arch = Architecture::new(vec![LayerShape::dense(2, 1, Activation::Sigmoid)], None).unwrap();
        let net = DenseNetwork::new(arch, vec![0.3, -0.2, 0.1]).unwrap();
        let mut grad = vec![0.0; 3];
        let p = net.accumulate_gradient(&[1.0], 0.5, 1.0, 1.0, &mut grad);
        // dL/dbias equals dL/dz.
        assert!((grad[2] - (p - 1.0)).abs() < 1e-15);
        assert!((grad[0] - (p - 1.0) * 1.0).abs() < 1e-15);
        assert!((grad[1] - (p - 1.0) * 0.5).abs() < 1e-15);
    }

    #[test]
    fn balanced_batch_on_symmetric_net_has_zero_output_bias_gradient() {
        let arch = DenseNetwork::mlp_architecture(2, &[3]);
        let n = arch.param_count();
        let net = DenseNetwork::new(arch, vec![0.0; n]).unwrap();
        let x = [0.3, -1.0, 0.7, 2.0];
        let bids = [0.1, 0.9];
        let targets = [1.0, 0.0];
        let samples = Samples::new(&x, 2, &bids, &targets).unwrap();
        let (_, grad) = loss_and_gradient(&net, &samples, &[0, 1]);
        assert_eq!(grad[n - 1], 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = stream_rng(3, 0);
        let arch = Architecture::new(
            vec![
                LayerShape::dense(3, 5, Activation::Relu),
                LayerShape::dense(6, 4, Activation::Sigmoid),
                LayerShape::dense(4, 1, Activation::Sigmoid),
            ],
            Some(1),
        )
        .unwrap();
        let mut net = DenseNetwork::init(arch, &mut rng);
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bids: Vec<f64> = (0..10).map(|_| rng.random()).collect();
        let targets: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let samples = Samples::new(&x, 3, &bids, &targets).unwrap();
        let rows: Vec<usize> = (0..10).collect();
        let (_, grad) = loss_and_gradient(&net, &samples, &rows);
        let h = 1e-5;
        for j in 0..net.params.len() {
            let orig = net.params[j];
            net.params[j] = orig + h;
            let up = loss_and_gradient(&net, &samples, &rows).0;
            net.params[j] = orig - h;
            let down = loss_and_gradient(&net, &samples, &rows).0;
            net.params[j] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {j}: analytic {} vs fd {fd}", grad[j]);
        }
    }

    fn separable(seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = stream_rng(seed, 0);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0..2.0)).collect();
        let targets: Vec<f64> = x.iter().map(|&v| f64::from(u8::from(v > 0.0))).collect();
        (x, vec![0.0; 200], targets)
    }

    #[test]
    fn logistic_unit_training_loss_decreases() {
        let mut monotone = 0;
        for seed in 0..10 {
            let (x, bids, targets) = separable(seed);
            let samples = Samples::new(&x, 1, &bids, &targets).unwrap();
            let arch = Architecture::new(vec![LayerShape::dense(2, 1, Activation::Sigmoid)], None).unwrap();
            let mut net = DenseNetwork::init(arch, &mut stream_rng(seed, 1));
            let cfg = TrainConfig {
                batch_size: 32,
                steps: 1000,
                learning_rate: 0.05,
                seed,
            };
            let report = train(&mut net, &samples, None, &cfg).unwrap();
            let losses: Vec<f64> = report.checkpoints.iter().map(|c| c.train_bce).collect();
            assert_eq!(losses.len(), 10);
            if losses.windows(2).all(|w| w[1] <= w[0]) {
                monotone += 1;
            }
        }
        assert!(monotone >= 9, "{monotone}/10 seeds monotone");
    }

    #[test]
    fn constant_target_is_learned() {
        let mut rng = stream_rng(5, 0);
        let x: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bids: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let targets = vec![1.0; 100];
        let samples = Samples::new(&x, 3, &bids, &targets).unwrap();
        let mut net = DenseNetwork::init(DenseNetwork::mlp_architecture(4, &[8, 8]), &mut stream_rng(5, 1));
        let cfg = TrainConfig {
            batch_size: 32,
            steps: 1000,
            learning_rate: 0.01,
            seed: 5,
        };
        train(&mut net, &samples, None, &cfg).unwrap();
        for i in 0..100 {
            assert!(net.predict(samples.row(i), bids[i]) > 0.95);
        }
    }

    #[test]
    fn training_is_reproducible() {
        let (x, bids, targets) = separable(2);
        let samples = Samples::new(&x, 1, &bids, &targets).unwrap();
        let cfg = TrainConfig {
            batch_size: 16,
            steps: 300,
            learning_rate: 0.05,
            seed: 11,
        };
        let run = || {
            let mut net = DenseNetwork::init(DenseNetwork::mlp_architecture(2, &[4]), &mut stream_rng(1, 1));
            train(&mut net, &samples, Some(&samples), &cfg).unwrap();
            net.params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn divergence_reports_step() {
        let x = vec![1.0; 10];
        let bids = vec![0.0; 10];
        let targets = vec![1.0; 10];
        let samples = Samples::new(&x, 1, &bids, &targets).unwrap();
        let arch = Architecture::new(vec![LayerShape::dense(2, 1, Activation::Sigmoid)], None).unwrap();
        let mut net = DenseNetwork::new(arch, vec![f64::NAN, 0.0, 0.0]).unwrap();
        let cfg = TrainConfig {
            batch_size: 4,
            steps: 10,
            learning_rate: 0.01,
            seed: 0,
        };
        assert!(matches!(train(&mut net, &samples, None, &cfg), Err(NetError::Divergence { step: 1 })));
    }

    #[test]
    fn validation_checkpoint_never_worse_than_start() {
        let (x, bids, targets) = separable(4);
        let samples = Samples::new(&x, 1, &bids, &targets).unwrap();
        let mut net = DenseNetwork::init(DenseNetwork::mlp_architecture(2, &[4]), &mut stream_rng(4, 1));
        let before = mean_bce(&net, &samples);
        let cfg = TrainConfig {
            batch_size: 16,
            steps: 200,
            learning_rate: 0.05,
            seed: 4,
        };
        train(&mut net, &samples, Some(&samples), &cfg).unwrap();
        assert!(mean_bce(&net, &samples) <= before);
    }

    #[test]
    fn snapshot_round_trips() {
        let net = DenseNetwork::init(DenseNetwork::mlp_architecture(3, &[4]), &mut stream_rng(9, 1));
        let snap = ParameterSnapshot {
            architecture: vec![net.architecture.clone()],
            params: net.params.clone(),
        };
        assert_eq!(ParameterSnapshot::from_json(&snap.to_json()).unwrap(), snap);
    }
}
