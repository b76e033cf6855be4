//! Bias-controlled assignment of factual bids.
//!
//! A factual bid is drawn from `Beta(θ + 1, θ/φ(x) + 1 − θ)`. The mode of that
//! distribution is the customer's modal bid `φ(x)`, and `θ = 0` reduces it to
//! the uniform distribution. Larger `θ` concentrates bids around `φ(x)`, which
//! ties the offered bid to the covariates.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::truth::{dot, ScoreBounds};
use super::{CovariateMatrix, DataError};
use crate::rng::{stream, stream_rng};

/// Modal bids are mapped into `[PHI_FLOOR, 1 − PHI_FLOOR]`.
pub const PHI_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub theta: f64,
    pub w5: Vec<f64>,
    pub phi_bounds: ScoreBounds,
}

impl BiasSpec {
    /// Modal bid φ(x), strictly inside (0, 1).
    pub fn modal_bid(&self, x: &[f64]) -> f64 {
        let s = self.phi_bounds.normalize(dot(&self.w5, x));
        (PHI_FLOOR + (1.0 - 2.0 * PHI_FLOOR) * s).clamp(PHI_FLOOR, 1.0 - PHI_FLOOR)
    }

    /// Beta shape parameters for a row.
    pub fn shapes(&self, x: &[f64]) -> Result<(f64, f64), DataError> {
        beta_shapes(self.theta, self.modal_bid(x))
    }
}

/// `(θ + 1, θ/φ + 1 − θ)`, the Beta parameters with mode φ.
pub fn beta_shapes(theta: f64, phi: f64) -> Result<(f64, f64), DataError> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(DataError::Argument(format!("bias strength must be >= 0, got {theta}")));
    }
    if !(phi > 0.0 && phi < 1.0) {
        return Err(DataError::Argument(format!("modal bid must lie in (0,1), got {phi}")));
    }
    let a = theta + 1.0;
    let b = theta / phi + 1.0 - theta;
    if !(b > 0.0) {
        return Err(DataError::Invariant(format!(
            "second Beta shape {b} <= 0 for theta={theta}, phi={phi}"
        )));
    }
    Ok((a, b))
}

/// Draws `w5` uniformly on [0, 1]^d and records the modal-score range.
pub fn draw_bias(
    covariates: &CovariateMatrix,
    theta: f64,
    seed: u64,
) -> Result<BiasSpec, DataError> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(DataError::Argument(format!("bias strength must be >= 0, got {theta}")));
    }
    if covariates.rows() == 0 {
        return Err(DataError::Argument("covariate matrix is empty".into()));
    }
    let mut rng = stream_rng(seed, stream::BIAS);
    let w5: Vec<f64> = (0..covariates.cols()).map(|_| rng.random()).collect();
    let phi_bounds = ScoreBounds::over(&w5, covariates);
    Ok(BiasSpec {
        theta,
        w5,
        phi_bounds,
    })
}

/// Draws one bid in (0, 1) with mode `phi`.
pub fn sample_bid_with_mode<R: Rng + ?Sized>(
    theta: f64,
    phi: f64,
    rng: &mut R,
) -> Result<f64, DataError> {
    let (a, b) = beta_shapes(theta, phi)?;
    let dist = Beta::new(a, b).map_err(|e| DataError::Invariant(e.to_string()))?;
    let draw: f64 = dist.sample(rng);
    Ok(draw.clamp(f64::EPSILON, 1.0 - f64::EPSILON))
}

/// Draws a factual bid for covariate row `x`.
pub fn sample_bid<R: Rng + ?Sized>(
    bias: &BiasSpec,
    x: &[f64],
    rng: &mut R,
) -> Result<f64, DataError> {
    sample_bid_with_mode(bias.theta, bias.modal_bid(x), rng)
}
