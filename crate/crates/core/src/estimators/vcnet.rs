//! Varying-coefficient network: a representation body on `x` and a head
//! whose weights are quadratic splines in the bid.

use serde::{Deserialize, Serialize};

use super::grids::product4;
use super::mlp::{train_config, train_hyperparameters, NetData};
use super::{factual_brier, EstimatorError, FittedModel, Method, ModelPayload, Selection, VcNetGrid};
use crate::netcore::{train, Activation, Architecture, GradientAt, LayerShape, TrainConfig, Trainable};
use crate::rng::{stream, stream_rng};
use crate::synthdata::PricingDataset;

pub const SPLINE_KNOTS: [f64; 2] = [1.0 / 3.0, 2.0 / 3.0];
const BASIS_LEN: usize = 5;

/// Truncated quadratic basis `[1, b, b², (b − 1/3)₊², (b − 2/3)₊²]`.
pub fn spline_basis(b: f64) -> [f64; BASIS_LEN] {
    let t = |k: f64| (b - k).max(0.0).powi(2);
    [1.0, b, b * b, t(SPLINE_KNOTS[0]), t(SPLINE_KNOTS[1])]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VcNetConfig {
    pub body_layers: usize,
    pub width: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcNetModel {
    /// Dense body layers followed by the varying head layers.
    pub network: Architecture,
    pub params: Vec<f64>,
}

impl VcNetModel {
    /// Body of `body_layers` ReLU layers, then a varying ReLU layer and a
    /// varying sigmoid output.
    pub fn architecture(dim: usize, config: &VcNetConfig) -> Result<Architecture, EstimatorError> {
        if config.body_layers == 0 || config.width == 0 {
            return Err(EstimatorError::Configuration("VCNet needs a non-empty body".into()));
        }
        let w = config.width;
        let mut layers: Vec<LayerShape> = (0..config.body_layers)
            .map(|l| LayerShape::dense(if l == 0 { dim } else { w }, w, Activation::Relu))
            .collect();
        layers.push(LayerShape::varying(w, w, Activation::Relu, BASIS_LEN));
        layers.push(LayerShape::varying(w, 1, Activation::Sigmoid, BASIS_LEN));
        Ok(Architecture::new(layers, None)?)
    }

    pub fn init(network: Architecture, seed: u64) -> Self {
        let params = network.init_params(&mut stream_rng(seed, stream::INIT));
        Self { network, params }
    }

    pub fn response(&self, bid: f64, x: &[f64]) -> f64 {
        self.predict(x, bid)
    }

    pub fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        bids.iter().map(|&b| self.predict(x, b)).collect()
    }

    /// Zeroes every spline coefficient except the constant one, leaving a
    /// head that ignores the bid.
    pub fn freeze_bid(&mut self) {
        let mut offset = 0;
        for layer in &self.network.layers {
            if layer.basis > 1 {
                for (j, p) in self.params[offset..offset + layer.param_count()].iter_mut().enumerate() {
                    if j % layer.basis != 0 {
                        *p = 0.0;
                    }
                }
            }
            offset += layer.param_count();
        }
    }
}

impl Trainable for VcNetModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn predict(&self, x: &[f64], bid: f64) -> f64 {
        self.network.forward(&self.params, x, bid, &spline_basis(bid)).output()[0]
    }

    fn accumulate_gradient(&self, x: &[f64], bid: f64, target: f64, weight: f64, grad: &mut [f64]) -> f64 {
        let basis = spline_basis(bid);
        let trace = self.network.forward(&self.params, x, bid, &basis);
        let p = trace.output()[0];
        self.network
            .backward(&self.params, &trace, &[weight * (p - target)], GradientAt::Logit, &basis, grad);
        p
    }
}

/// Trains one VCNet per grid member and keeps the best by validation Brier.
pub fn fit_vcnet(
    train_data: &PricingDataset,
    validation: &PricingDataset,
    grid: &VcNetGrid,
    seed: u64,
) -> Result<FittedModel, EstimatorError> {
    let data = NetData::of(train_data);
    let val = NetData::of(validation);
    let mut selection = Selection::new();
    for &body_layers in &grid.body_layers {
        for (width, batch, steps, lr) in product4(&grid.width, &grid.batch_size, &grid.steps, &grid.learning_rate) {
            if train_data.len() < batch {
                return Err(EstimatorError::DegenerateData(format!(
                    "{} training rows for batch size {batch}",
                    train_data.len()
                )));
            }
            let config = VcNetConfig {
                body_layers,
                width,
                train: train_config(batch, steps, lr, seed),
            };
            let mut model = VcNetModel::init(VcNetModel::architecture(train_data.dim(), &config)?, seed);
            train(&mut model, &data.samples(), Some(&val.samples()), &config.train)?;
            let brier = factual_brier(|b, x| model.response(b, x), validation);
            let mut hp = train_hyperparameters(&config.train);
            hp.insert("body_layers".into(), body_layers.to_string());
            hp.insert("width".into(), width.to_string());
            hp.insert("spline".into(), "quadratic, knots 1/3 2/3".into());
            selection.offer(brier, model, hp);
        }
    }
    let (model, hp, _) = selection.finish()?;
    Ok(FittedModel::new(Method::VcNet, ModelPayload::VcNet(model)).with_hyperparameters(hp))
}
