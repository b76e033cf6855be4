//! The seven bid-response estimators behind one contract: fit on factual
//! observations, then predict μ̂(b, x) for any bid in [0, 1].
//!
//! | method        | parametric | causal |
//! |---------------|------------|--------|
//! | naive pricing | n.a.       | no     |
//! | logistic      | yes        | no     |
//! | random forest | no         | no     |
//! | MLP           | no         | no     |
//! | HIE           | yes        | yes    |
//! | DRNet         | no         | yes    |
//! | VCNet         | no         | yes    |
//!
//! Non-causal methods see the concatenation `[x, b]`. Hyperparameters are
//! chosen by Brier score on the validation split, the only criterion
//! available without counterfactual outcomes.

mod drnet;
mod forest;
mod grids;
mod hie;
mod logistic;
mod mlp;
mod naive;
mod vcnet;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use drnet::{fit_drnet, stratum_index, DrNetConfig, DrNetModel, StrataLayout};
pub use forest::{fit_random_forest, DecisionTree, ForestParams, RandomForest, TreeParams};
pub use grids::{DrNetGrid, ForestGrid, Grids, NetGrid, VcNetGrid};
pub use hie::{fit_gps, fit_hie, gps_density, hie_features, GpsModel, HieModel};
pub use logistic::{fit_logistic, LogisticModel, LogisticRegression, RIDGE};
pub use mlp::{fit_mlp, MlpConfig, MlpModel};
pub use naive::{fit_naive, NaiveModel};
pub use vcnet::{fit_vcnet, spline_basis, VcNetConfig, VcNetModel, SPLINE_KNOTS};

use crate::netcore::NetError;
use crate::response::BidResponse;
use crate::synthdata::{GroundTruthSpec, PricingDataset};

#[derive(Debug, thiserror::Error)]
pub enum EstimatorError {
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Training(#[from] NetError),
    #[error("serialization: {0}")]
    Serialization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    Logistic,
    RandomForest,
    Mlp,
    Hie,
    #[serde(rename = "drnet")]
    DrNet,
    #[serde(rename = "vcnet")]
    VcNet,
    /// The generating ground truth wrapped as a model; a reference point,
    /// not an estimator.
    Oracle,
}

impl Method {
    /// The seven estimators, in table order.
    pub const ESTIMATORS: [Method; 7] = [
        Method::Naive,
        Method::Logistic,
        Method::RandomForest,
        Method::Mlp,
        Method::Hie,
        Method::DrNet,
        Method::VcNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Logistic => "logistic",
            Method::RandomForest => "random_forest",
            Method::Mlp => "mlp",
            Method::Hie => "hie",
            Method::DrNet => "drnet",
            Method::VcNet => "vcnet",
            Method::Oracle => "oracle",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Naive => "Naive pricing",
            Method::Logistic => "Logistic Regression",
            Method::RandomForest => "Random Forest",
            Method::Mlp => "MLP",
            Method::Hie => "HIE",
            Method::DrNet => "DRNets",
            Method::VcNet => "VCNets",
            Method::Oracle => "Oracle",
        }
    }

    /// Whether the method produces a bid-response curve.
    pub fn predicts_response(self) -> bool {
        self != Method::Naive
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match key.as_str() {
            "naive" | "naive_pricing" => Ok(Method::Naive),
            "logistic" | "logit" | "logistic_regression" => Ok(Method::Logistic),
            "random_forest" | "rf" | "forest" => Ok(Method::RandomForest),
            "mlp" => Ok(Method::Mlp),
            "hie" => Ok(Method::Hie),
            "drnet" | "drnets" => Ok(Method::DrNet),
            "vcnet" | "vcnets" => Ok(Method::VcNet),
            "oracle" => Ok(Method::Oracle),
            other => Err(EstimatorError::Argument(format!("unknown method `{other}`"))),
        }
    }
}

/// Method-specific fitted state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum ModelPayload {
    Naive(NaiveModel),
    Logistic(LogisticModel),
    RandomForest(RandomForest),
    Mlp(MlpModel),
    Hie(HieModel),
    DrNet(DrNetModel),
    VcNet(VcNetModel),
    Oracle(GroundTruthSpec),
}

/// Chosen hyperparameters, rendered as strings for reporting.
pub type Hyperparameters = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub method: Method,
    pub payload: ModelPayload,
    pub hyperparameters: Hyperparameters,
    /// Fit-time events worth logging, such as merged DRNet strata.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl FittedModel {
    pub fn new(method: Method, payload: ModelPayload) -> Self {
        Self {
            method,
            payload,
            hyperparameters: Hyperparameters::new(),
            notes: Vec::new(),
        }
    }

    pub fn oracle(truth: GroundTruthSpec) -> Self {
        Self::new(Method::Oracle, ModelPayload::Oracle(truth))
    }

    pub fn with_hyperparameters(mut self, hyperparameters: Hyperparameters) -> Self {
        self.hyperparameters = hyperparameters;
        self
    }

    pub fn supports_response(&self) -> bool {
        !matches!(self.payload, ModelPayload::Naive(_))
    }

    /// μ̂(b, x) in [0, 1].
    pub fn predict_response(&self, bid: f64, x: &[f64]) -> Result<f64, EstimatorError> {
        if !(0.0..=1.0).contains(&bid) {
            return Err(EstimatorError::Argument(format!("bid {bid} outside [0, 1]")));
        }
        if let Some(d) = self.input_dim() {
            if x.len() != d {
                return Err(EstimatorError::Argument(format!(
                    "row has {} entries, model expects {d}",
                    x.len()
                )));
            }
        }
        self.curve(&[bid], x).map(|c| c[0])
    }

    /// Predicted response at every bid in `bids` for one row. Bids are
    /// clamped to [0, 1].
    pub fn curve(&self, bids: &[f64], x: &[f64]) -> Result<Vec<f64>, EstimatorError> {
        let bids: Vec<f64> = bids.iter().map(|b| b.clamp(0.0, 1.0)).collect();
        let raw = match &self.payload {
            ModelPayload::Naive(_) => {
                return Err(EstimatorError::Unsupported(
                    "naive pricing does not estimate a bid-response curve".into(),
                ))
            }
            ModelPayload::Logistic(m) => m.curve(&bids, x),
            ModelPayload::RandomForest(m) => m.curve(&bids, x),
            ModelPayload::Mlp(m) => m.curve(&bids, x),
            ModelPayload::Hie(m) => m.curve(&bids, x),
            ModelPayload::DrNet(m) => m.curve(&bids, x),
            ModelPayload::VcNet(m) => m.curve(&bids, x),
            ModelPayload::Oracle(t) => t.curve(&bids, x),
        };
        Ok(raw.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
    }

    /// The bid this model proposes without a response curve. Only naive
    /// pricing has one: the factual bid of a row it was fit on.
    pub fn proposed_bid(&self, x: &[f64]) -> Result<f64, EstimatorError> {
        match &self.payload {
            ModelPayload::Naive(m) => m.proposed_bid(x),
            _ => Err(EstimatorError::Unsupported(format!(
                "{} proposes bids through its response curve",
                self.method
            ))),
        }
    }

    fn input_dim(&self) -> Option<usize> {
        match &self.payload {
            ModelPayload::Naive(_) => None,
            ModelPayload::Logistic(m) => Some(m.regression.coefficients.len() - 2),
            ModelPayload::RandomForest(m) => Some(m.n_features - 1),
            ModelPayload::Mlp(m) => Some(m.network.architecture.input_dim() - 1),
            ModelPayload::Hie(m) => Some(m.gps.coefficients.len() - 1),
            ModelPayload::DrNet(m) => Some(m.body.input_dim()),
            ModelPayload::VcNet(m) => Some(m.network.input_dim()),
            ModelPayload::Oracle(t) => Some(t.dim()),
        }
    }

    pub fn to_json(&self) -> Result<String, EstimatorError> {
        serde_json::to_string(self).map_err(|e| EstimatorError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, EstimatorError> {
        serde_json::from_str(text).map_err(|e| EstimatorError::Serialization(e.to_string()))
    }
}

/// Fits any method with the given grids. `seed` drives every random choice
/// of the fit.
pub fn fit(
    method: Method,
    train: &PricingDataset,
    validation: &PricingDataset,
    grids: &Grids,
    seed: u64,
) -> Result<FittedModel, EstimatorError> {
    match method {
        Method::Naive => Ok(fit_naive(train)),
        Method::Logistic => fit_logistic(train, validation),
        Method::RandomForest => fit_random_forest(train, validation, &grids.forest, seed),
        Method::Mlp => fit_mlp(train, validation, &grids.mlp, seed),
        Method::Hie => fit_hie(train, validation),
        Method::DrNet => fit_drnet(train, validation, &grids.drnet, seed),
        Method::VcNet => fit_vcnet(train, validation, &grids.vcnet, seed),
        Method::Oracle => Ok(FittedModel::oracle(train.truth.clone())),
    }
}

/// Mean squared error of predicted probabilities at the factual bids.
pub(crate) fn factual_brier(curve_at: impl Fn(f64, &[f64]) -> f64, data: &PricingDataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    (0..data.len())
        .map(|i| (data.outcome(i) - curve_at(data.bids[i], data.row(i))).powi(2))
        .sum::<f64>()
        / data.len() as f64
}

/// `[x, b]` rows as one flat buffer.
pub(crate) fn with_bid_column(data: &PricingDataset) -> Vec<f64> {
    let d = data.dim();
    let mut out = Vec::with_capacity(data.len() * (d + 1));
    for i in 0..data.len() {
        out.extend_from_slice(data.row(i));
        out.push(data.bids[i]);
    }
    out
}

pub(crate) fn targets(data: &PricingDataset) -> Vec<f64> {
    data.outcomes.iter().map(|&y| f64::from(y)).collect()
}

/// Keeps the candidate with the lowest validation Brier score; ties keep
/// the earlier grid member.
pub(crate) struct Selection<T> {
    best: Option<(f64, T, Hyperparameters)>,
}

impl<T> Selection<T> {
    pub fn new() -> Self {
        Self { best: None }
    }

    pub fn offer(&mut self, brier: f64, candidate: T, hyperparameters: Hyperparameters) {
        let better = match &self.best {
            None => true,
            Some((b, _, _)) => brier < *b,
        };
        if better && brier.is_finite() {
            self.best = Some((brier, candidate, hyperparameters));
        }
    }

    pub fn finish(self) -> Result<(T, Hyperparameters, f64), EstimatorError> {
        self.best
            .map(|(b, c, h)| (c, h, b))
            .ok_or_else(|| EstimatorError::Configuration("empty hyperparameter grid".into()))
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::synthdata::*;

    pub fn dataset(family: CurveFamily, theta: f64, n: usize, seed: u64) -> SplitDataset {
        let cov = synthesize_covariates(n, 5, 1, seed).unwrap();
        let truth = draw_ground_truth(family, &cov, 0.1, seed).unwrap();
        let bias = draw_bias(&cov, theta, seed).unwrap();
        let ds = generate_dataset(&cov, &truth, &bias, seed).unwrap();
        split(&ds, seed).unwrap()
    }
}
