use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{with_bid_column, EstimatorError, FittedModel, Method, ModelPayload};
use crate::netcore::sigmoid;
use crate::synthdata::PricingDataset;

/// Ridge penalty added to the Newton system.
pub const RIDGE: f64 = 1e-6;

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-10;

/// Logistic regression with intercept, fit by penalized iteratively
/// reweighted least squares. `coefficients[0]` is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub coefficients: Vec<f64>,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticRegression {
    pub fn predict(&self, features: &[f64]) -> f64 {
        sigmoid(self.linear(features))
    }

    fn linear(&self, features: &[f64]) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(features)
                .map(|(c, f)| c * f)
                .sum::<f64>()
    }

    /// Fits on `features` (row-major, `p` columns, no intercept column).
    pub fn fit(features: &[f64], p: usize, y: &[f64], ridge: f64) -> Result<Self, EstimatorError> {
        let n = y.len();
        if features.len() != n * p {
            return Err(EstimatorError::Argument(format!(
                "{} feature values for {n} rows of {p} columns",
                features.len()
            )));
        }
        let positives = y.iter().filter(|&&v| v > 0.5).count();
        if positives == 0 || positives == n {
            return Err(EstimatorError::DegenerateData(
                "logistic regression needs both accepted and rejected offers".into(),
            ));
        }
        let k = p + 1;
        let design = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { features[i * p + j - 1] });
        let target = DVector::from_column_slice(y);
        let objective = |beta: &DVector<f64>| -> f64 {
            let eta = &design * beta;
            let ll: f64 = eta
                .iter()
                .zip(target.iter())
                .map(|(&e, &t)| t * e - softplus(e))
                .sum();
            ll - 0.5 * ridge * beta.norm_squared()
        };

        let mut beta = DVector::zeros(k);
        let mut current = objective(&beta);
        for _ in 0..MAX_ITER {
            let eta = &design * &beta;
            let mu = eta.map(sigmoid);
            let w = mu.map(|m| (m * (1.0 - m)).max(1e-12));
            let grad = design.transpose() * (&target - &mu) - ridge * &beta;
            let mut weighted = design.clone();
            for (i, mut row) in weighted.row_iter_mut().enumerate() {
                row *= w[i];
            }
            let mut hessian = design.transpose() * weighted;
            for j in 0..k {
                hessian[(j, j)] += ridge;
            }
            let step = match hessian.clone().cholesky() {
                Some(c) => c.solve(&grad),
                None => hessian
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| EstimatorError::DegenerateData("singular Newton system".into()))?,
            };
            // Backtracking keeps every accepted step an ascent step.
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let candidate = &beta + scale * &step;
                let value = objective(&candidate);
                if value >= current {
                    accepted = Some((candidate, value));
                    break;
                }
                scale *= 0.5;
            }
            let Some((next, value)) = accepted else { break };
            let change = (scale * &step).amax();
            beta = next;
            let improvement = value - current;
            current = value;
            if change < TOL || improvement.abs() < 1e-14 * current.abs().max(1.0) {
                break;
            }
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(EstimatorError::DegenerateData("non-finite coefficients".into()));
        }
        Ok(Self {
            coefficients: beta.iter().copied().collect(),
        })
    }
}

/// Logistic regression on `[x, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub regression: LogisticRegression,
}

impl LogisticModel {
    pub fn response(&self, bid: f64, x: &[f64]) -> f64 {
        let mut features = x.to_vec();
        features.push(bid);
        self.regression.predict(&features)
    }

    pub fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        // The covariate part of the linear predictor is shared by every bid.
        let c = &self.regression.coefficients;
        let base = c[0] + c[1..c.len() - 1].iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let slope = c[c.len() - 1];
        bids.iter().map(|&b| sigmoid(base + slope * b)).collect()
    }

    /// Bid coefficient.
    pub fn bid_coefficient(&self) -> f64 {
        *self.regression.coefficients.last().expect("non-empty coefficients")
    }
}

/// Fits logistic regression on the training split. The validation split
/// is not needed: the model has no hyperparameters.
pub fn fit_logistic(train: &PricingDataset, _validation: &PricingDataset) -> Result<FittedModel, EstimatorError> {
    let features = with_bid_column(train);
    let y: Vec<f64> = train.outcomes.iter().map(|&v| f64::from(v)).collect();
    let regression = LogisticRegression::fit(&features, train.dim() + 1, &y, RIDGE)?;
    let mut model = FittedModel::new(Method::Logistic, ModelPayload::Logistic(LogisticModel { regression }));
    model.hyperparameters.insert("ridge".into(), RIDGE.to_string());
    Ok(model)
}
