//! Hirano-Imbens estimator: a Normal generalized propensity score for the
//! bid, then a logistic model on a quadratic in bid and score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::logistic::LogisticRegression;
use super::{EstimatorError, FittedModel, Method, ModelPayload, RIDGE};
use crate::synthdata::PricingDataset;

/// Linear-Gaussian model of the bid given covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsModel {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub residual_sd: f64,
}

impl GpsModel {
    pub fn mean(&self, x: &[f64]) -> f64 {
        self.coefficients[0] + self.coefficients[1..].iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Ordinary least squares of `bids` on `[1, x]`.
pub fn fit_gps(x: &[f64], dim: usize, bids: &[f64]) -> Result<GpsModel, EstimatorError> {
    let n = bids.len();
    if x.len() != n * dim {
        return Err(EstimatorError::Argument(format!("{} covariate values for {n} rows", x.len())));
    }
    let k = dim + 1;
    if n <= k {
        return Err(EstimatorError::DegenerateData(format!("{n} rows for {k} coefficients")));
    }
    let design = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { x[i * dim + j - 1] });
    let target = DVector::from_column_slice(bids);
    let beta = design
        .clone()
        .svd(true, true)
        .solve(&target, 1e-12)
        .map_err(|e| EstimatorError::DegenerateData(e.to_string()))?;
    let residuals = &target - &design * &beta;
    let rss = residuals.norm_squared();
    let residual_sd = (rss / (n - k) as f64).sqrt();
    if !(residual_sd > 1e-12) || !residual_sd.is_finite() {
        return Err(EstimatorError::DegenerateData("bids are an exact linear function of covariates".into()));
    }
    Ok(GpsModel {
        coefficients: beta.iter().copied().collect(),
        residual_sd,
    })
}

/// Normal density of `b` under the propensity model at `x`.
pub fn gps_density(gps: &GpsModel, b: f64, x: &[f64]) -> f64 {
    let z = (b - gps.mean(x)) / gps.residual_sd;
    (-0.5 * z * z).exp() / (gps.residual_sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Stage-two features `[b, b², R, R², b·R]`.
pub fn hie_features(b: f64, r: f64) -> [f64; 5] {
    [b, b * b, r, r * r, b * r]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HieModel {
    pub gps: GpsModel,
    pub outcome: LogisticRegression,
}

impl HieModel {
    /// Individual-level prediction: the score is recomputed at the
    /// counterfactual bid.
    pub fn response(&self, bid: f64, x: &[f64]) -> f64 {
        self.outcome.predict(&hie_features(bid, gps_density(&self.gps, bid, x)))
    }

    pub fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        let mean = self.gps.mean(x);
        let sd = self.gps.residual_sd;
        let norm = sd * (2.0 * std::f64::consts::PI).sqrt();
        bids.iter()
            .map(|&b| {
                let z = (b - mean) / sd;
                self.outcome.predict(&hie_features(b, (-0.5 * z * z).exp() / norm))
            })
            .collect()
    }
}

pub fn fit_hie(train: &PricingDataset, _validation: &PricingDataset) -> Result<FittedModel, EstimatorError> {
    let dim = train.dim();
    let gps = fit_gps(train.covariates.values(), dim, &train.bids)?;
    let mut features = Vec::with_capacity(train.len() * 5);
    for i in 0..train.len() {
        let b = train.bids[i];
        features.extend_from_slice(&hie_features(b, gps_density(&gps, b, train.row(i))));
    }
    let y: Vec<f64> = train.outcomes.iter().map(|&v| f64::from(v)).collect();
    let outcome = LogisticRegression::fit(&features, 5, &y, RIDGE)?;
    let mut model = FittedModel::new(Method::Hie, ModelPayload::Hie(HieModel { gps, outcome }));
    model.hyperparameters.insert("ridge".into(), RIDGE.to_string());
    Ok(model)
}
