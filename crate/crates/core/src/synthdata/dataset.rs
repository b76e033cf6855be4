use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::bidding::{sample_bid, BiasSpec};
use super::truth::GroundTruthSpec;
use super::{ColumnKind, CovariateMatrix, DataError};
use crate::response::BidResponse;
use crate::rng::{stream, stream_rng};

/// Factual observations `(x_i, b_f, p_f, y_f)` with the surface that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingDataset {
    pub covariates: CovariateMatrix,
    pub bids: Vec<f64>,
    pub accept_probs: Vec<f64>,
    pub outcomes: Vec<u8>,
    pub truth: GroundTruthSpec,
    pub bias: BiasSpec,
    pub seed: u64,
}

impl PricingDataset {
    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.covariates.row(i)
    }

    pub fn outcome(&self, i: usize) -> f64 {
        f64::from(self.outcomes[i])
    }

    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.outcomes.iter().map(|&y| f64::from(y)).sum::<f64>() / self.len() as f64
    }

    /// Lowest and highest factual bid.
    pub fn bid_range(&self) -> (f64, f64) {
        self.bids
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)))
    }

    /// Materializes the given rows.
    pub fn subset(&self, indices: &[usize]) -> PricingDataset {
        PricingDataset {
            covariates: self.covariates.select_rows(indices),
            bids: indices.iter().map(|&i| self.bids[i]).collect(),
            accept_probs: indices.iter().map(|&i| self.accept_probs[i]).collect(),
            outcomes: indices.iter().map(|&i| self.outcomes[i]).collect(),
            truth: self.truth.clone(),
            bias: self.bias.clone(),
            seed: self.seed,
        }
    }
}

/// Bids, noisy probabilities and outcomes drawn for every covariate row.
#[derive(Debug, Clone, PartialEq)]
pub struct FactualDraws {
    pub bids: Vec<f64>,
    pub accept_probs: Vec<f64>,
    pub outcomes: Vec<u8>,
}

/// Draws factual data against any response surface. Bids, noise and
/// outcomes come from separate streams of `seed`.
pub fn simulate_factuals<T: BidResponse + ?Sized>(
    covariates: &CovariateMatrix,
    truth: &T,
    bias: &BiasSpec,
    noise_sd: f64,
    seed: u64,
) -> Result<FactualDraws, DataError> {
    let n = covariates.rows();
    let mut bid_rng = stream_rng(seed, stream::BIDS);
    let mut noise_rng = stream_rng(seed, stream::NOISE);
    let mut outcome_rng = stream_rng(seed, stream::OUTCOMES);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| DataError::Argument(e.to_string()))?;
    let mut out = FactualDraws {
        bids: Vec::with_capacity(n),
        accept_probs: Vec::with_capacity(n),
        outcomes: Vec::with_capacity(n),
    };
    for x in covariates.iter_rows() {
        let bid = sample_bid(bias, x, &mut bid_rng)?;
        let eps = if noise_sd > 0.0 {
            noise.sample(&mut noise_rng)
        } else {
            0.0
        };
        let p = (truth.response(bid, x) + eps).clamp(0.0, 1.0);
        let u: f64 = outcome_rng.random();
        out.bids.push(bid);
        out.accept_probs.push(p);
        out.outcomes.push(u8::from(u < p));
    }
    Ok(out)
}

/// Generates the factual dataset for one ground truth and bias setting.
pub fn generate_dataset(
    covariates: &CovariateMatrix,
    truth: &GroundTruthSpec,
    bias: &BiasSpec,
    seed: u64,
) -> Result<PricingDataset, DataError> {
    if truth.dim() != covariates.cols() || bias.w5.len() != covariates.cols() {
        return Err(DataError::Argument(
            "truth, bias and covariates disagree on dimension".into(),
        ));
    }
    let draws = simulate_factuals(covariates, truth, bias, truth.noise_sd, seed)?;
    Ok(PricingDataset {
        covariates: covariates.clone(),
        bids: draws.bids,
        accept_probs: draws.accept_probs,
        outcomes: draws.outcomes,
        truth: truth.clone(),
        bias: bias.clone(),
        seed,
    })
}

/// Train / validation / test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: PricingDataset,
    pub validation: PricingDataset,
    pub test: PricingDataset,
    /// Row indices of the parent dataset in each part.
    pub indices: [Vec<usize>; 3],
}

pub const SPLIT_RATIOS: (f64, f64, f64) = (0.7, 0.1, 0.2);

/// Part sizes for `n` rows: rounded 70 % and 10 %, remainder to test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n as f64 * SPLIT_RATIOS.0).round() as usize;
    let validation = ((n as f64 * SPLIT_RATIOS.1).round() as usize).min(n - train);
    (train, validation, n - train - validation)
}

/// Shuffles rows with `seed` and cuts them 70/10/20.
pub fn split(dataset: &PricingDataset, seed: u64) -> Result<SplitDataset, DataError> {
    let n = dataset.len();
    if n < 10 {
        return Err(DataError::Argument(format!("need at least 10 rows to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, stream::SPLIT));
    let (n_train, n_val, _) = split_sizes(n);
    let train_idx = order[..n_train].to_vec();
    let val_idx = order[n_train..n_train + n_val].to_vec();
    let test_idx = order[n_train + n_val..].to_vec();
    Ok(SplitDataset {
        train: dataset.subset(&train_idx),
        validation: dataset.subset(&val_idx),
        test: dataset.subset(&test_idx),
        indices: [train_idx, val_idx, test_idx],
    })
}

/// Everything needed to rebuild a dataset next to its CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub seed: u64,
    pub column_kinds: Vec<ColumnKind>,
    pub truth: GroundTruthSpec,
    pub bias: BiasSpec,
}

impl DatasetSpec {
    pub fn of(dataset: &PricingDataset) -> Self {
        Self {
            seed: dataset.seed,
            column_kinds: dataset.covariates.kinds().to_vec(),
            truth: dataset.truth.clone(),
            bias: dataset.bias.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String, DataError> {
        toml::to_string_pretty(self).map_err(|e| DataError::Io(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        toml::from_str(text).map_err(|e| DataError::Io(e.to_string()))
    }
}

/// Writes `x_0..x_{d-1},bid,p_factual,y`.
pub fn write_dataset_csv<W: Write>(dataset: &PricingDataset, writer: W) -> Result<(), DataError> {
    let mut csv = csv::Writer::from_writer(writer);
    let d = dataset.dim();
    let mut header: Vec<String> = (0..d).map(|j| format!("x_{j}")).collect();
    header.extend(["bid", "p_factual", "y"].map(String::from));
    csv.write_record(&header).map_err(io_err)?;
    for i in 0..dataset.len() {
        let mut record: Vec<String> = dataset.row(i).iter().map(|v| v.to_string()).collect();
        record.push(dataset.bids[i].to_string());
        record.push(dataset.accept_probs[i].to_string());
        record.push(dataset.outcomes[i].to_string());
        csv.write_record(&record).map_err(io_err)?;
    }
    csv.flush().map_err(|e| DataError::Io(e.to_string()))
}

/// Reads a CSV written by [`write_dataset_csv`]. Covariates are taken as
/// already standardized.
pub fn read_dataset_csv<R: Read>(reader: R, spec: &DatasetSpec) -> Result<PricingDataset, DataError> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers().map_err(io_err)?.clone();
    let d = spec.column_kinds.len();
    if header.len() != d + 3 {
        return Err(DataError::Argument(format!(
            "expected {} columns, found {}",
            d + 3,
            header.len()
        )));
    }
    let (mut values, mut bids, mut probs, mut outcomes) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(io_err)?;
        let mut cells = Vec::with_capacity(d + 3);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
                row: i,
                column: j,
                value: cell.to_string(),
            })?;
            cells.push(v);
        }
        if cells.len() != d + 3 {
            return Err(DataError::Ingestion {
                row: i,
                column: cells.len(),
                reason: "short row".into(),
            });
        }
        values.extend_from_slice(&cells[..d]);
        bids.push(cells[d]);
        probs.push(cells[d + 1]);
        let y = cells[d + 2];
        if y != 0.0 && y != 1.0 {
            return Err(DataError::NotBinary { row: i, column: d + 2 });
        }
        outcomes.push(y as u8);
    }
    let rows = bids.len();
    Ok(PricingDataset {
        covariates: CovariateMatrix::from_standardized(rows, d, values, spec.column_kinds.clone())?,
        bids,
        accept_probs: probs,
        outcomes,
        truth: spec.truth.clone(),
        bias: spec.bias.clone(),
        seed: spec.seed,
    })
}

fn io_err(e: csv::Error) -> DataError {
    DataError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{draw_bias, draw_ground_truth, synthesize_covariates, CurveFamily};

    fn dataset(n: usize, theta: f64, seed: u64) -> PricingDataset {
        let cov = synthesize_covariates(n, 6, 2, seed).unwrap();
        let truth = draw_ground_truth(CurveFamily::Richards, &cov, 0.1, seed).unwrap();
        let bias = draw_bias(&cov, theta, seed).unwrap();
        generate_dataset(&cov, &truth, &bias, seed).unwrap()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn generated_rows_respect_ranges() {
        let ds = dataset(500, 5.0, 3);
        assert_eq!(ds.len(), 500);
        assert!(ds.bids.iter().all(|&b| b > 0.0 && b < 1.0));
        assert!(ds.accept_probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(ds.outcomes.iter().all(|&y| y <= 1));
    }

    #[test]
    fn regeneration_is_bit_exact() {
        assert_eq!(dataset(300, 2.5, 8), dataset(300, 2.5, 8));
    }

    #[test]
    fn certain_acceptance_gives_all_ones() {
        let cov = synthesize_covariates(200, 3, 0, 1).unwrap();
        let bias = draw_bias(&cov, 2.0, 1).unwrap();
        let one = |_: f64, _: &[f64]| 1.0;
        let draws = simulate_factuals(&cov, &one, &bias, 0.0, 1).unwrap();
        assert!(draws.outcomes.iter().all(|&y| y == 1));
    }

    #[test]
    fn fair_coin_outcome_rate() {
        let cov = synthesize_covariates(100_000, 2, 0, 2).unwrap();
        let bias = draw_bias(&cov, 0.0, 2).unwrap();
        let half = |_: f64, _: &[f64]| 0.5;
        let draws = simulate_factuals(&cov, &half, &bias, 0.0, 2).unwrap();
        let mean = draws.outcomes.iter().map(|&y| f64::from(y)).sum::<f64>() / 100_000.0;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn bias_ties_bids_to_modal_rate() {
        let cov = synthesize_covariates(5_000, 6, 2, 5).unwrap();
        let truth = draw_ground_truth(CurveFamily::Richards, &cov, 0.1, 5).unwrap();
        let strong = draw_bias(&cov, 20.0, 5).unwrap();
        let none = BiasSpec {
            theta: 0.0,
            ..strong.clone()
        };
        let phi: Vec<f64> = cov.iter_rows().map(|x| strong.modal_bid(x)).collect();
        let biased = generate_dataset(&cov, &truth, &strong, 5).unwrap();
        let unbiased = generate_dataset(&cov, &truth, &none, 5).unwrap();
        let c_strong = pearson(&biased.bids, &phi).abs();
        let c_none = pearson(&unbiased.bids, &phi).abs();
        assert!(c_strong > c_none, "{c_strong} vs {c_none}");
        assert!(c_strong > 0.8);
    }

    #[test]
    fn split_sizes_follow_ratios() {
        assert_eq!(split_sizes(12_000), (8_400, 1_200, 2_400));
        assert_eq!(split_sizes(10), (7, 1, 2));
        assert_eq!(split_sizes(2_000), (1_400, 200, 400));
    }

    #[test]
    fn split_is_a_reproducible_partition() {
        let ds = dataset(137, 1.0, 4);
        let a = split(&ds, 9).unwrap();
        let b = split(&ds, 9).unwrap();
        assert_eq!(a.indices, b.indices);
        let mut all: Vec<usize> = a.indices.concat();
        all.sort_unstable();
        assert_eq!(all, (0..137).collect::<Vec<_>>());
        assert_eq!(a.train.len() + a.validation.len() + a.test.len(), 137);
        let i = a.indices[2][0];
        assert_eq!(a.test.bids[0], ds.bids[i]);
        assert_eq!(a.test.row(0), ds.row(i));
        assert!(split(&dataset(10, 0.0, 1).subset(&[0, 1, 2]), 1).is_err());
    }

    #[test]
    fn csv_and_spec_round_trip() {
        let ds = dataset(40, 3.0, 6);
        let mut buf = Vec::new();
        write_dataset_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_0,x_1,x_2,x_3,x_4,x_5,bid,p_factual,y\n"));
        let spec = DatasetSpec::from_toml(&DatasetSpec::of(&ds).to_toml().unwrap()).unwrap();
        assert_eq!(spec, DatasetSpec::of(&ds));
        let back = read_dataset_csv(buf.as_slice(), &spec).unwrap();
        assert_eq!(back, ds);
    }
}
