//! Dose-response network: a shared representation of `x` feeding one
//! inference head per bid stratum. Each head sees `[representation, b]`.

use serde::{Deserialize, Serialize};

use super::grids::product4;
use super::mlp::{train_config, train_hyperparameters, NetData};
use super::{factual_brier, DrNetGrid, EstimatorError, FittedModel, Method, ModelPayload, Selection};
use crate::netcore::{train, Activation, Architecture, GradientAt, LayerShape, TrainConfig, Trainable};
use crate::rng::{stream, stream_rng};
use crate::synthdata::PricingDataset;

/// Stratum of `b` among `strata` equal-width intervals of [0, 1].
pub fn stratum_index(b: f64, strata: usize) -> usize {
    ((b * strata as f64).floor() as usize).min(strata - 1)
}

/// Maps each of the `strata` intervals to a head. Empty intervals share
/// the head of their right neighbour, trailing ones that of their left.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrataLayout {
    pub strata: usize,
    pub head_of: Vec<usize>,
    pub heads: usize,
}

impl StrataLayout {
    /// One head per stratum.
    pub fn even(strata: usize) -> Self {
        Self {
            strata,
            head_of: (0..strata).collect(),
            heads: strata,
        }
    }

    /// Merges empty strata given the training bids. Returns the layout and
    /// a description of every merge.
    pub fn from_bids(bids: &[f64], strata: usize) -> Result<(Self, Vec<String>), EstimatorError> {
        if strata == 0 {
            return Err(EstimatorError::Configuration("DRNet needs at least one stratum".into()));
        }
        let mut counts = vec![0usize; strata];
        for &b in bids {
            counts[stratum_index(b.clamp(0.0, 1.0), strata)] += 1;
        }
        let Some(last_filled) = counts.iter().rposition(|&c| c > 0) else {
            return Err(EstimatorError::Configuration("no training bids to stratify".into()));
        };
        let mut head_of = vec![0; strata];
        let mut notes = Vec::new();
        let mut head = 0;
        let mut pending = Vec::new();
        for s in 0..strata {
            if counts[s] == 0 {
                pending.push(s);
                continue;
            }
            for &p in &pending {
                head_of[p] = head;
                notes.push(format!("stratum {p} of {strata} empty, merged into stratum {s}"));
            }
            pending.clear();
            head_of[s] = head;
            if s < last_filled {
                head += 1;
            }
        }
        for &p in &pending {
            head_of[p] = head;
            notes.push(format!("stratum {p} of {strata} empty, merged into stratum {last_filled}"));
        }
        Ok((
            Self {
                strata,
                head_of,
                heads: head + 1,
            },
            notes,
        ))
    }

    pub fn head(&self, b: f64) -> usize {
        self.head_of[stratum_index(b.clamp(0.0, 1.0), self.strata)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrNetConfig {
    pub strata: usize,
    pub representation_layers: usize,
    pub inference_layers: usize,
    pub width: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrNetModel {
    /// Representation network on `x`.
    pub body: Architecture,
    /// Shape shared by every head; the bid enters at its first layer.
    pub head: Architecture,
    /// Body parameters followed by one block per head.
    pub params: Vec<f64>,
    pub layout: StrataLayout,
}

impl DrNetModel {
    pub fn architectures(dim: usize, config: &DrNetConfig) -> Result<(Architecture, Architecture), EstimatorError> {
        if config.representation_layers == 0 || config.width == 0 {
            return Err(EstimatorError::Configuration("DRNet needs a non-empty representation".into()));
        }
        let w = config.width;
        let body_layers = (0..config.representation_layers)
            .map(|l| LayerShape::dense(if l == 0 { dim } else { w }, w, Activation::Relu))
            .collect();
        let mut head_layers: Vec<LayerShape> = (0..config.inference_layers)
            .map(|l| LayerShape::dense(if l == 0 { w + 1 } else { w }, w, Activation::Relu))
            .collect();
        let last_in = if config.inference_layers == 0 { w + 1 } else { w };
        head_layers.push(LayerShape::dense(last_in, 1, Activation::Sigmoid));
        Ok((Architecture::new(body_layers, None)?, Architecture::new(head_layers, Some(0))?))
    }

    /// Fresh parameters: body first, then each head, in layer order.
    pub fn init(body: Architecture, head: Architecture, layout: StrataLayout, seed: u64) -> Self {
        let mut rng = stream_rng(seed, stream::INIT);
        let mut params = body.init_params(&mut rng);
        for _ in 0..layout.heads {
            params.extend(head.init_params(&mut rng));
        }
        Self {
            body,
            head,
            params,
            layout,
        }
    }

    fn head_params(&self, h: usize) -> std::ops::Range<usize> {
        let start = self.body.param_count() + h * self.head.param_count();
        start..start + self.head.param_count()
    }

    fn representation(&self, x: &[f64]) -> Vec<f64> {
        let body_params = &self.params[..self.body.param_count()];
        self.body.forward(body_params, x, 0.0, &[1.0]).output().to_vec()
    }

    pub fn response(&self, bid: f64, x: &[f64]) -> f64 {
        self.predict(x, bid)
    }

    pub fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        let rep = self.representation(x);
        bids.iter()
            .map(|&b| {
                let p = &self.params[self.head_params(self.layout.head(b))];
                self.head.forward(p, &rep, b, &[1.0]).output()[0]
            })
            .collect()
    }
}

impl Trainable for DrNetModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn predict(&self, x: &[f64], bid: f64) -> f64 {
        let rep = self.representation(x);
        let p = &self.params[self.head_params(self.layout.head(bid))];
        self.head.forward(p, &rep, bid, &[1.0]).output()[0]
    }

    fn accumulate_gradient(&self, x: &[f64], bid: f64, target: f64, weight: f64, grad: &mut [f64]) -> f64 {
        let n_body = self.body.param_count();
        let body_params = &self.params[..n_body];
        let body_trace = self.body.forward(body_params, x, 0.0, &[1.0]);
        let range = self.head_params(self.layout.head(bid));
        let head_params = &self.params[range.clone()];
        let head_trace = self.head.forward(head_params, body_trace.output(), bid, &[1.0]);
        let p = head_trace.output()[0];
        let g_rep = self.head.backward(
            head_params,
            &head_trace,
            &[weight * (p - target)],
            GradientAt::Logit,
            &[1.0],
            &mut grad[range],
        );
        self.body
            .backward(body_params, &body_trace, &g_rep, GradientAt::Output, &[1.0], &mut grad[..n_body]);
        p
    }
}

/// Trains one DRNet per grid member and keeps the best by validation Brier.
/// Merged strata are reported in the model notes.
pub fn fit_drnet(
    train_data: &PricingDataset,
    validation: &PricingDataset,
    grid: &DrNetGrid,
    seed: u64,
) -> Result<FittedModel, EstimatorError> {
    let data = NetData::of(train_data);
    let val = NetData::of(validation);
    let mut selection = Selection::new();
    for &strata in &grid.strata {
        let (layout, notes) = StrataLayout::from_bids(&train_data.bids, strata)?;
        for &representation_layers in &grid.representation_layers {
            for &inference_layers in &grid.inference_layers {
                for (width, batch, steps, lr) in product4(&grid.width, &grid.batch_size, &grid.steps, &grid.learning_rate) {
                    let config = DrNetConfig {
                        strata,
                        representation_layers,
                        inference_layers,
                        width,
                        train: train_config(batch, steps, lr, seed),
                    };
                    if train_data.len() < batch {
                        return Err(EstimatorError::DegenerateData(format!(
                            "{} training rows for batch size {batch}",
                            train_data.len()
                        )));
                    }
                    let (body, head) = DrNetModel::architectures(train_data.dim(), &config)?;
                    let mut model = DrNetModel::init(body, head, layout.clone(), seed);
                    train(&mut model, &data.samples(), Some(&val.samples()), &config.train)?;
                    let brier = factual_brier(|b, x| model.response(b, x), validation);
                    let mut hp = train_hyperparameters(&config.train);
                    hp.insert("strata".into(), strata.to_string());
                    hp.insert("representation_layers".into(), representation_layers.to_string());
                    hp.insert("inference_layers".into(), inference_layers.to_string());
                    hp.insert("width".into(), width.to_string());
                    selection.offer(brier, (model, notes.clone()), hp);
                }
            }
        }
    }
    let ((model, notes), hp, _) = selection.finish()?;
    let mut fitted = FittedModel::new(Method::DrNet, ModelPayload::DrNet(model)).with_hyperparameters(hp);
    fitted.notes = notes;
    Ok(fitted)
}
