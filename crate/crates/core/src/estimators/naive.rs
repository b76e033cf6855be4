use serde::{Deserialize, Serialize};

use super::{EstimatorError, FittedModel, Method, ModelPayload};
use crate::synthdata::PricingDataset;

/// Naive pricing: the best bid for a customer is taken to be the bid the
/// established policy already offered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveModel {
    rows: Vec<Vec<f64>>,
    bids: Vec<f64>,
}

impl NaiveModel {
    /// The factual bid of a training row.
    pub fn proposed_bid(&self, x: &[f64]) -> Result<f64, EstimatorError> {
        self.rows
            .iter()
            .position(|r| r.as_slice() == x)
            .map(|i| self.bids[i])
            .ok_or_else(|| {
                EstimatorError::Unsupported(
                    "naive pricing only knows the factual bids of rows it has seen".into(),
                )
            })
    }
}

pub fn fit_naive(train: &PricingDataset) -> FittedModel {
    let model = NaiveModel {
        rows: (0..train.len()).map(|i| train.row(i).to_vec()).collect(),
        bids: train.bids.clone(),
    };
    FittedModel::new(Method::Naive, ModelPayload::Naive(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::testutil::dataset;
    use crate::synthdata::CurveFamily;

    #[test]
    fn proposes_the_factual_bid() {
        let s = dataset(CurveFamily::Richards, 3.0, 60, 4);
        let m = fit_naive(&s.train);
        for i in 0..s.train.len() {
            assert_eq!(m.proposed_bid(s.train.row(i)).unwrap(), s.train.bids[i]);
        }
        assert!(m.proposed_bid(&[9.0; 5]).is_err());
    }
}
