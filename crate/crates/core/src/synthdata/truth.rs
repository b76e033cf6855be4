//! Ground-truth bid-response surfaces.
//!
//! Each curve is parameterized per customer by four scores `s_j(x)` in
//! [0, 1]. A score is the linear combination `w_jᵀx` rescaled by the minimum
//! and maximum it takes over the generating covariate matrix, which keeps
//! every curve parameter inside the range where the response is a decreasing
//! probability.
//!
//! * Richards: `p = (1 − α) − (β − α) / (1 + exp(−γ (b − δ)))` with
//!   `α = 0.2 s1`, `β = 0.8 + 0.2 s2`, `γ = 0.5 + 5 s3`, `δ = s4`.
//! * Stacked sigmoid: `p = α + β σ(b / γ) + (1 − α − β) σ((b − δ) / (1 − δ))`
//!   with `α = 0.2 s1`, `β = 0.8 s2`, `γ = 0.25 + 0.75 s3`, `δ = 0.9 s4` and
//!   the decreasing step `σ(z) = 1 / (1 + exp(20 (z − 0.5)))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CovariateMatrix, DataError};
use crate::response::BidResponse;
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFamily {
    Richards,
    StackedSigmoid,
}

impl CurveFamily {
    pub const ALL: [CurveFamily; 2] = [CurveFamily::Richards, CurveFamily::StackedSigmoid];

    pub fn name(self) -> &'static str {
        match self {
            CurveFamily::Richards => "richards",
            CurveFamily::StackedSigmoid => "stacked_sigmoid",
        }
    }
}

impl std::fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CurveFamily {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "richards" => Ok(CurveFamily::Richards),
            "stacked_sigmoid" | "stacked" | "ss" => Ok(CurveFamily::StackedSigmoid),
            other => Err(DataError::Argument(format!("unknown curve family `{other}`"))),
        }
    }
}

/// Range of a raw linear score over the generating matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBounds {
    pub min: f64,
    pub max: f64,
}

impl ScoreBounds {
    /// Bounds of `wᵀx` over all rows; a degenerate range is widened to
    /// `[min − 0.5, min + 0.5]`.
    pub fn over(weights: &[f64], covariates: &CovariateMatrix) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in covariates.iter_rows() {
            let s = dot(weights, x);
            min = min.min(s);
            max = max.max(s);
        }
        if !(max - min > 1e-12) {
            return Self {
                min: min - 0.5,
                max: min + 0.5,
            };
        }
        Self { min, max }
    }

    /// Maps a raw score to [0, 1]; values outside the recorded range clamp.
    pub fn normalize(&self, raw: f64) -> f64 {
        ((raw - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Decreasing logistic step centred at 0.5.
pub fn step_sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (20.0 * (z - 0.5)).exp())
}

/// Per-customer curve parameters (α, β, γ, δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveParams {
    pub family: CurveFamily,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl CurveParams {
    pub fn from_scores(family: CurveFamily, s: [f64; 4]) -> Self {
        match family {
            CurveFamily::Richards => Self {
                family,
                alpha: 0.2 * s[0],
                beta: 0.8 + 0.2 * s[1],
                gamma: 0.5 + 5.0 * s[2],
                delta: s[3],
            },
            CurveFamily::StackedSigmoid => Self {
                family,
                alpha: 0.2 * s[0],
                beta: 0.8 * s[1],
                gamma: 0.25 + 0.75 * s[2],
                delta: 0.9 * s[3],
            },
        }
    }

    /// Noiseless acceptance probability at `bid`, clamped to [0, 1].
    pub fn response(&self, bid: f64) -> f64 {
        let Self {
            alpha,
            beta,
            gamma,
            delta,
            ..
        } = *self;
        let p = match self.family {
            CurveFamily::Richards => {
                (1.0 - alpha) - (beta - alpha) / (1.0 + (-gamma * (bid - delta)).exp())
            }
            CurveFamily::StackedSigmoid => {
                alpha
                    + beta * step_sigmoid(bid / gamma)
                    + (1.0 - alpha - beta) * step_sigmoid((bid - delta) / (1.0 - delta))
            }
        };
        p.clamp(0.0, 1.0)
    }
}

/// A drawn ground-truth bid-response surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSpec {
    pub family: CurveFamily,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
    pub w4: Vec<f64>,
    /// Standard deviation of the additive noise on factual probabilities.
    pub noise_sd: f64,
    pub score_bounds: [ScoreBounds; 4],
}

impl GroundTruthSpec {
    pub fn dim(&self) -> usize {
        self.w1.len()
    }

    fn weights(&self) -> [&[f64]; 4] {
        [&self.w1, &self.w2, &self.w3, &self.w4]
    }

    /// Normalized scores `s_1..s_4` of a covariate row.
    pub fn scores(&self, x: &[f64]) -> [f64; 4] {
        let w = self.weights();
        std::array::from_fn(|j| self.score_bounds[j].normalize(dot(w[j], x)))
    }

    pub fn params(&self, x: &[f64]) -> CurveParams {
        CurveParams::from_scores(self.family, self.scores(x))
    }
}

impl BidResponse for GroundTruthSpec {
    /// Bids outside [0, 1] are clamped onto the domain.
    fn response(&self, bid: f64, x: &[f64]) -> f64 {
        self.params(x).response(bid.clamp(0.0, 1.0))
    }

    fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        let params = self.params(x);
        bids.iter().map(|&b| params.response(b.clamp(0.0, 1.0))).collect()
    }
}

/// Draws `w1..w4` uniformly on [0, 1]^d and records score bounds over
/// `covariates`.
pub fn draw_ground_truth(
    family: CurveFamily,
    covariates: &CovariateMatrix,
    noise_sd: f64,
    seed: u64,
) -> Result<GroundTruthSpec, DataError> {
    if covariates.rows() == 0 || covariates.cols() == 0 {
        return Err(DataError::Argument("covariate matrix is empty".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(DataError::Argument(format!("invalid noise sd {noise_sd}")));
    }
    let d = covariates.cols();
    let mut rng = stream_rng(seed, stream::TRUTH);
    let mut draw = || -> Vec<f64> { (0..d).map(|_| rng.random::<f64>()).collect() };
    let (w1, w2, w3, w4) = (draw(), draw(), draw(), draw());
    let score_bounds = [
        ScoreBounds::over(&w1, covariates),
        ScoreBounds::over(&w2, covariates),
        ScoreBounds::over(&w3, covariates),
        ScoreBounds::over(&w4, covariates),
    ];
    Ok(GroundTruthSpec {
        family,
        w1,
        w2,
        w3,
        w4,
        noise_sd,
        score_bounds,
    })
}

/// Noiseless μ(b, x); rejects bids outside [0, 1].
pub fn true_response(spec: &GroundTruthSpec, bid: f64, x: &[f64]) -> Result<f64, DataError> {
    if !(0.0..=1.0).contains(&bid) {
        return Err(DataError::Domain(bid));
    }
    if x.len() != spec.dim() {
        return Err(DataError::Argument(format!(
            "row has {} entries, truth expects {}",
            x.len(),
            spec.dim()
        )));
    }
    Ok(spec.params(x).response(bid))
}
