//! Counterfactual metrics (MISE, revenue MISE, policy error), the factual
//! Brier score and the grid search for revenue-optimal bids.
//!
//! Integrals over the bid range use composite Simpson weights on a uniform
//! grid spanning the training bids. Simpson is exact for the polynomial
//! integrands that arise when curves are constant, which the revenue
//! weighting `b²` otherwise turns into an `O(h²)` error.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::estimators::{EstimatorError, FittedModel, Method};
use crate::response::BidResponse;
use crate::synthdata::PricingDataset;

/// Default number of grid points.
pub const GRID_POINTS: usize = 65;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("metric not applicable: {metric} is undefined for {method}")]
    NotApplicable { metric: Metric, method: Method },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Model(#[from] EstimatorError),
}

/// Uniform bid grid over `[b_min, b_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidGrid {
    pub b_min: f64,
    pub b_max: f64,
    values: Vec<f64>,
}

impl BidGrid {
    /// `points` must be odd and at least 3.
    pub fn new(b_min: f64, b_max: f64, points: usize) -> Result<Self, MetricError> {
        if points < 3 || points.is_multiple_of(2) {
            return Err(MetricError::Argument(format!("grid needs an odd number >= 3 of points, got {points}")));
        }
        if !(0.0..=1.0).contains(&b_min) || !(0.0..=1.0).contains(&b_max) || b_min > b_max {
            return Err(MetricError::Argument(format!("invalid bid range [{b_min}, {b_max}]")));
        }
        let step = (b_max - b_min) / (points - 1) as f64;
        let mut values: Vec<f64> = (0..points).map(|i| b_min + step * i as f64).collect();
        values[points - 1] = b_max;
        Ok(Self { b_min, b_max, values })
    }

    /// Grid over the range of bids observed in `train`.
    pub fn from_training(train: &PricingDataset, points: usize) -> Result<Self, MetricError> {
        if train.is_empty() {
            return Err(MetricError::Argument("empty training set".into()));
        }
        let (lo, hi) = train.bid_range();
        Self::new(lo, hi, points)
    }

    pub fn unit(points: usize) -> Result<Self, MetricError> {
        Self::new(0.0, 1.0, points)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.b_max - self.b_min) / (self.values.len() - 1) as f64
    }

    /// Integral of a function sampled at the grid points.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        simpson(samples, self.spacing())
    }
}

/// Composite Simpson rule for an odd number of equally spaced samples.
pub fn simpson(samples: &[f64], spacing: f64) -> f64 {
    let n = samples.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson's rule needs an odd number >= 3 of samples");
    let mut sum = samples[0] + samples[n - 1];
    for (i, v) in samples.iter().enumerate().take(n - 1).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    sum * spacing / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mise,
    MiseR,
    Pe,
    Bs,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Mise, Metric::Pe, Metric::Bs, Metric::MiseR];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mise => "mise",
            Metric::MiseR => "mise_r",
            Metric::Pe => "pe",
            Metric::Bs => "bs",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Mise => "MISE",
            Metric::MiseR => "MISE R",
            Metric::Pe => "Policy error",
            Metric::Bs => "Brier score",
        }
    }

    /// Naive pricing has no response curve and only supports policy error.
    pub fn applies_to(self, method: Method) -> bool {
        method.predicts_response() || self == Metric::Pe
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "mise" => Ok(Metric::Mise),
            "mise_r" | "miser" | "mise_revenue" => Ok(Metric::MiseR),
            "pe" | "policy_error" => Ok(Metric::Pe),
            "bs" | "brier" | "brier_score" => Ok(Metric::Bs),
            other => Err(MetricError::Argument(format!("unknown metric `{other}`"))),
        }
    }
}

/// A fitted model viewed as a response function. Naive pricing is refused.
pub struct ModelResponse<'a>(&'a FittedModel);

impl<'a> ModelResponse<'a> {
    pub fn new(model: &'a FittedModel, metric: Metric) -> Result<Self, MetricError> {
        if model.supports_response() {
            Ok(Self(model))
        } else {
            Err(MetricError::NotApplicable {
                metric,
                method: model.method,
            })
        }
    }
}

impl BidResponse for ModelResponse<'_> {
    fn response(&self, bid: f64, x: &[f64]) -> f64 {
        self.curve(&[bid], x)[0]
    }

    fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        self.0.curve(bids, x).expect("response support checked on construction")
    }
}

fn integrated_error<E, T>(est: &E, truth: &T, test: &PricingDataset, grid: &BidGrid, revenue: bool) -> f64
where
    E: BidResponse + ?Sized,
    T: BidResponse + ?Sized,
{
    if test.is_empty() {
        return 0.0;
    }
    let bids = grid.values();
    let mut buf = vec![0.0; bids.len()];
    let mut total = 0.0;
    for i in 0..test.len() {
        let x = test.row(i);
        let (t, e) = (truth.curve(bids, x), est.curve(bids, x));
        for k in 0..bids.len() {
            let w = if revenue { bids[k] } else { 1.0 };
            buf[k] = (w * (t[k] - e[k])).powi(2);
        }
        total += grid.integrate(&buf);
    }
    total / test.len() as f64
}

/// Mean over test rows of `∫ (μ − μ̂)² db` over the grid range.
pub fn mise<E, T>(est: &E, truth: &T, test: &PricingDataset, grid: &BidGrid) -> f64
where
    E: BidResponse + ?Sized,
    T: BidResponse + ?Sized,
{
    integrated_error(est, truth, test, grid, false)
}

/// Mean over test rows of `∫ (b·μ − b·μ̂)² db`, the error in expected revenue.
pub fn mise_revenue<E, T>(est: &E, truth: &T, test: &PricingDataset, grid: &BidGrid) -> f64
where
    E: BidResponse + ?Sized,
    T: BidResponse + ?Sized,
{
    integrated_error(est, truth, test, grid, true)
}

/// Index of the largest `bids[k] · probs[k]`; the first (lowest bid) wins ties.
pub fn revenue_argmax(bids: &[f64], probs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_rev = f64::NEG_INFINITY;
    for (k, (&b, &p)) in bids.iter().zip(probs).enumerate() {
        let rev = b * p;
        if rev > best_rev {
            best_rev = rev;
            best = k;
        }
    }
    best
}

/// Revenue-maximizing grid bid for a single customer's responder.
pub fn optimal_bid(responder: impl Fn(f64) -> f64, grid: &BidGrid) -> f64 {
    let probs: Vec<f64> = grid.values().iter().map(|&b| responder(b)).collect();
    grid.values()[revenue_argmax(grid.values(), &probs)]
}

/// Mean squared gap between the true and the model's optimal bid. Naive
/// pricing proposes each test row's factual bid.
pub fn policy_error<T>(model: &FittedModel, truth: &T, test: &PricingDataset, grid: &BidGrid) -> f64
where
    T: BidResponse + ?Sized,
{
    let bids = grid.values();
    let proposal = |i: usize, x: &[f64]| -> f64 {
        if model.supports_response() {
            let est = model.curve(bids, x).expect("response support checked");
            bids[revenue_argmax(bids, &est)]
        } else {
            test.bids[i]
        }
    };
    policy_error_with(proposal, truth, test, grid)
}

/// Policy error of an arbitrary bid proposal `(row index, row) → bid`.
pub fn policy_error_with<T>(proposal: impl Fn(usize, &[f64]) -> f64, truth: &T, test: &PricingDataset, grid: &BidGrid) -> f64
where
    T: BidResponse + ?Sized,
{
    if test.is_empty() {
        return 0.0;
    }
    let bids = grid.values();
    let total: f64 = (0..test.len())
        .map(|i| {
            let x = test.row(i);
            let best = bids[revenue_argmax(bids, &truth.curve(bids, x))];
            (best - proposal(i, x)).powi(2)
        })
        .sum();
    total / test.len() as f64
}

/// Mean squared error of predicted probabilities against binary outcomes.
pub fn brier_score(pred: &[f64], outcomes: &[f64]) -> Result<f64, MetricError> {
    if pred.len() != outcomes.len() {
        return Err(MetricError::Argument(format!(
            "{} predictions for {} outcomes",
            pred.len(),
            outcomes.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(outcomes).map(|(p, y)| (y - p).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Brier score at the factual test bids, clamped into the grid range.
pub fn brier<E: BidResponse + ?Sized>(est: &E, test: &PricingDataset, grid: &BidGrid) -> f64 {
    let pred: Vec<f64> = (0..test.len())
        .map(|i| est.response(test.bids[i].clamp(grid.b_min, grid.b_max), test.row(i)))
        .collect();
    let outcomes: Vec<f64> = (0..test.len()).map(|i| test.outcome(i)).collect();
    brier_score(&pred, &outcomes).expect("lengths agree")
}

/// One model's scores on one test set; `None` marks an inapplicable metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mise: Option<f64>,
    pub mise_r: Option<f64>,
    pub pe: Option<f64>,
    pub bs: Option<f64>,
}

impl MetricsReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Mise => self.mise,
            Metric::MiseR => self.mise_r,
            Metric::Pe => self.pe,
            Metric::Bs => self.bs,
        }
    }

    pub fn set(&mut self, metric: Metric, value: Option<f64>) {
        match metric {
            Metric::Mise => self.mise = value,
            Metric::MiseR => self.mise_r = value,
            Metric::Pe => self.pe = value,
            Metric::Bs => self.bs = value,
        }
    }

    /// Flat `metric → value` record; inapplicable metrics read "n.a.".
    pub fn to_record(&self) -> BTreeMap<&'static str, String> {
        Metric::ALL
            .iter()
            .map(|&m| (m.name(), self.get(m).map_or_else(|| "n.a.".to_string(), |v| v.to_string())))
            .collect()
    }
}

/// Scores a model on every metric, computing each row's curves once.
pub fn evaluate_all<T>(model: &FittedModel, truth: &T, test: &PricingDataset, grid: &BidGrid) -> MetricsReport
where
    T: BidResponse + ?Sized,
{
    let bids = grid.values();
    let n = test.len().max(1) as f64;
    if !model.supports_response() {
        return MetricsReport {
            pe: Some(policy_error(model, truth, test, grid)),
            ..MetricsReport::default()
        };
    }
    let (mut mise_sum, mut miser_sum, mut pe_sum) = (0.0, 0.0, 0.0);
    let mut sq = vec![0.0; bids.len()];
    let mut sq_rev = vec![0.0; bids.len()];
    for i in 0..test.len() {
        let x = test.row(i);
        let t = truth.curve(bids, x);
        let e = model.curve(bids, x).expect("response support checked");
        for k in 0..bids.len() {
            let d = t[k] - e[k];
            sq[k] = d * d;
            sq_rev[k] = (bids[k] * d).powi(2);
        }
        mise_sum += grid.integrate(&sq);
        miser_sum += grid.integrate(&sq_rev);
        let gap = bids[revenue_argmax(bids, &t)] - bids[revenue_argmax(bids, &e)];
        pe_sum += gap * gap;
    }
    let response = ModelResponse(model);
    MetricsReport {
        mise: Some(mise_sum / n),
        mise_r: Some(miser_sum / n),
        pe: Some(pe_sum / n),
        bs: Some(brier(&response, test, grid)),
    }
}

/// Scores one metric, refusing metrics the method does not support.
pub fn evaluate_metric<T>(
    model: &FittedModel,
    truth: &T,
    test: &PricingDataset,
    grid: &BidGrid,
    metric: Metric,
) -> Result<f64, MetricError>
where
    T: BidResponse + ?Sized,
{
    if metric == Metric::Pe {
        return Ok(policy_error(model, truth, test, grid));
    }
    let est = ModelResponse::new(model, metric)?;
    Ok(match metric {
        Metric::Mise => mise(&est, truth, test, grid),
        Metric::MiseR => mise_revenue(&est, truth, test, grid),
        Metric::Bs => brier(&est, test, grid),
        Metric::Pe => unreachable!(),
    })
}
