//! Semi-synthetic pricing data: covariates, ground-truth bid-response
//! surfaces, bias-controlled factual bids and Bernoulli outcomes.

mod bidding;
mod covariates;
mod dataset;
mod requirements;
mod truth;

pub use bidding::{beta_shapes, draw_bias, sample_bid, sample_bid_with_mode, BiasSpec, PHI_FLOOR};
pub use covariates::{load_covariates, read_covariates, synthesize_covariates, ColumnKind, CovariateMatrix};
pub use dataset::{
    generate_dataset, read_dataset_csv, simulate_factuals, split, split_sizes, write_dataset_csv,
    DatasetSpec, FactualDraws, PricingDataset, SplitDataset, SPLIT_RATIOS,
};
pub use requirements::{check_requirements, RequirementReport};
pub use truth::{
    draw_ground_truth, step_sigmoid, true_response, CurveFamily, CurveParams, GroundTruthSpec,
    ScoreBounds,
};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("bid {0} outside [0, 1]")]
    Domain(f64),
    #[error("row {row}, column {column}: {reason}")]
    Ingestion {
        row: usize,
        column: usize,
        reason: String,
    },
    #[error("row {row}, column {column}: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("row {row}, column {column}: dummy column holds a value other than 0 or 1")]
    NotBinary { row: usize, column: usize },
    #[error("zero variance column {column}")]
    ZeroVariance { column: usize },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("i/o: {0}")]
    Io(String),
}
