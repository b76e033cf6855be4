use serde::{Deserialize, Serialize};

use super::grids::product4;
use super::{factual_brier, targets, EstimatorError, FittedModel, Hyperparameters, Method, ModelPayload, NetGrid, Selection};
use crate::netcore::{train, DenseNetwork, Samples, TrainConfig, Trainable};
use crate::rng::{stream, stream_rng};
use crate::synthdata::PricingDataset;

/// Owned `(x, b, y)` buffers of one split, viewable as [`Samples`].
pub(super) struct NetData {
    x: Vec<f64>,
    dim: usize,
    bids: Vec<f64>,
    targets: Vec<f64>,
}

impl NetData {
    pub fn of(data: &PricingDataset) -> Self {
        Self {
            x: data.covariates.values().to_vec(),
            dim: data.dim(),
            bids: data.bids.clone(),
            targets: targets(data),
        }
    }

    pub fn samples(&self) -> Samples<'_> {
        Samples::new(&self.x, self.dim, &self.bids, &self.targets).expect("dataset buffers are consistent")
    }
}

/// Training settings shared by the network estimators.
pub(super) fn train_config(batch_size: usize, steps: usize, learning_rate: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size,
        steps,
        learning_rate,
        seed,
    }
}

pub(super) fn train_hyperparameters(cfg: &TrainConfig) -> Hyperparameters {
    let mut hp = Hyperparameters::new();
    hp.insert("batch_size".into(), cfg.batch_size.to_string());
    hp.insert("steps".into(), cfg.steps.to_string());
    hp.insert("learning_rate".into(), cfg.learning_rate.to_string());
    hp
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: DenseNetwork,
}

impl MlpModel {
    /// Initializes and trains one network. The validation split, when
    /// given, selects the best checkpoint.
    pub fn fit(train_data: &PricingDataset, validation: Option<&PricingDataset>, config: &MlpConfig) -> Result<Self, EstimatorError> {
        if train_data.len() < config.train.batch_size {
            return Err(EstimatorError::DegenerateData(format!(
                "{} training rows for batch size {}",
                train_data.len(),
                config.train.batch_size
            )));
        }
        let arch = DenseNetwork::mlp_architecture(train_data.dim() + 1, &vec![config.width; config.hidden_layers]);
        let mut network = DenseNetwork::init(arch, &mut stream_rng(config.train.seed, stream::INIT));
        let data = NetData::of(train_data);
        let val = validation.map(NetData::of);
        train(&mut network, &data.samples(), val.as_ref().map(|v| v.samples()).as_ref(), &config.train)?;
        Ok(Self { network })
    }

    pub fn response(&self, bid: f64, x: &[f64]) -> f64 {
        self.network.predict(x, bid)
    }

    pub fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        bids.iter().map(|&b| self.network.predict(x, b)).collect()
    }
}

/// Trains one MLP per grid member and keeps the best by validation Brier.
pub fn fit_mlp(
    train_data: &PricingDataset,
    validation: &PricingDataset,
    grid: &NetGrid,
    seed: u64,
) -> Result<FittedModel, EstimatorError> {
    let mut selection = Selection::new();
    for &hidden_layers in &grid.hidden_layers {
        for (width, batch, steps, lr) in product4(&grid.width, &grid.batch_size, &grid.steps, &grid.learning_rate) {
            let config = MlpConfig {
                hidden_layers,
                width,
                train: train_config(batch, steps, lr, seed),
            };
            let model = MlpModel::fit(train_data, Some(validation), &config)?;
            let brier = factual_brier(|b, x| model.response(b, x), validation);
            let mut hp = train_hyperparameters(&config.train);
            hp.insert("hidden_layers".into(), hidden_layers.to_string());
            hp.insert("width".into(), width.to_string());
            selection.offer(brier, model, hp);
        }
    }
    let (model, hp, _) = selection.finish()?;
    Ok(FittedModel::new(Method::Mlp, ModelPayload::Mlp(model)).with_hyperparameters(hp))
}
