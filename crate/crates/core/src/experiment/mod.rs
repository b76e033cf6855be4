//! The bias-sweep protocol: for every curve family, bias strength and
//! repetition, generate one dataset, fit every configured method on it and
//! score the fits on the held-out split.
//!
//! Cells are independent and run on a bounded worker pool. Each cell's seed
//! is a hash of its coordinates, so the results do not depend on the number
//! of workers or on scheduling order.

mod table;

pub use table::{emit_table, write_results_csv, write_run_log, Aggregate, TableFormat};

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimators::{self, Grids, Hyperparameters, Method};
use crate::evaluation::{evaluate_all, BidGrid, MetricsReport, GRID_POINTS};
use crate::rng::derive_seed;
use crate::synthdata::{
    draw_bias, draw_ground_truth, generate_dataset, load_covariates, split, synthesize_covariates, ColumnKind,
    CovariateMatrix, CurveFamily, PricingDataset, SplitDataset,
};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cell {family}/theta={theta}/rep={repetition}: {message}")]
    Cell {
        family: CurveFamily,
        theta: f64,
        repetition: usize,
        message: String,
    },
    #[error(transparent)]
    Data(#[from] crate::synthdata::DataError),
    #[error("i/o: {0}")]
    Io(String),
}

/// A covariate CSV used instead of synthetic covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSource {
    pub path: PathBuf,
    pub schema: Vec<ColumnKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub n_dummy: usize,
    pub families: Vec<CurveFamily>,
    pub bias_levels: Vec<f64>,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub noise_sd: f64,
    pub grid_points: usize,
    /// Worker threads for the sweep; `0` uses every available core.
    pub workers: usize,
    pub covariates: Option<CovariateSource>,
    pub grids: Grids,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 13,
            n_dummy: 4,
            families: CurveFamily::ALL.to_vec(),
            bias_levels: vec![0.0, 2.5, 5.0, 7.5, 10.0, 15.0, 20.0],
            repetitions: 10,
            methods: Method::ESTIMATORS.to_vec(),
            seed: 0,
            noise_sd: 0.1,
            grid_points: GRID_POINTS,
            workers: 0,
            covariates: None,
            grids: Grids::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: String| Err(ExperimentError::Config(m));
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.families.is_empty() || self.methods.is_empty() || self.bias_levels.is_empty() {
            return fail("families, methods and bias levels must be non-empty".into());
        }
        if self.bias_levels.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return fail(format!("bias levels must be finite and >= 0: {:?}", self.bias_levels));
        }
        for (i, a) in self.bias_levels.iter().enumerate() {
            if self.bias_levels[..i].contains(a) {
                return fail(format!("bias level {a} listed twice"));
            }
        }
        if self.covariates.is_none() && (self.n < 10 || self.n_dummy >= self.d) {
            return fail(format!("need n >= 10 and n_dummy < d (n={}, d={}, n_dummy={})", self.n, self.d, self.n_dummy));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return fail(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if self.grid_points < 3 || self.grid_points.is_multiple_of(2) {
            return fail(format!("grid_points must be odd and >= 3, got {}", self.grid_points));
        }
        self.grids.validate().map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Cells in table order: family, then bias level, then repetition.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &family in &self.families {
            for &theta in &self.bias_levels {
                for repetition in 0..self.repetitions {
                    cells.push(Cell {
                        family,
                        theta,
                        repetition,
                    });
                }
            }
        }
        cells
    }
}

/// Coordinates of one dataset of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub family: CurveFamily,
    pub theta: f64,
    pub repetition: usize,
}

fn family_code(family: CurveFamily) -> u64 {
    match family {
        CurveFamily::Richards => 1,
        CurveFamily::StackedSigmoid => 2,
    }
}

impl Cell {
    /// Covariates depend on the repetition only.
    pub fn covariate_seed(&self, root: u64) -> u64 {
        derive_seed(root, &[0, self.repetition as u64])
    }

    /// The ground truth is redrawn per repetition and shared by every bias
    /// level, so a row of the table compares bias strengths on the same
    /// surfaces.
    pub fn truth_seed(&self, root: u64) -> u64 {
        derive_seed(root, &[1, family_code(self.family), self.repetition as u64])
    }

    /// Seed for the bias vector, factual draws, split and model fits.
    pub fn seed(&self, root: u64) -> u64 {
        derive_seed(root, &[2, family_code(self.family), self.theta.to_bits(), self.repetition as u64])
    }
}

/// One method's result in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub family: CurveFamily,
    pub method: Method,
    pub theta: f64,
    pub repetition: usize,
    pub report: MetricsReport,
    pub hyperparameters: Hyperparameters,
    /// Set when fitting failed; the report is then empty.
    pub error: Option<String>,
    /// Seconds spent fitting and scoring. Not part of the results CSV.
    #[serde(skip)]
    pub wall_time: f64,
}

/// All records of one cell plus its log lines.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub records: Vec<Record>,
    pub notes: Vec<String>,
    pub wall_time: f64,
}

/// Builds the split dataset of one cell.
pub fn cell_dataset(config: &ExperimentConfig, cell: &Cell, covariates: Option<&CovariateMatrix>) -> Result<SplitDataset, ExperimentError> {
    let data = cell_full_dataset(config, cell, covariates)?;
    Ok(split(&data, data.seed)?)
}

/// The unsplit dataset of one cell. Its `seed` drives the split and fits.
pub fn cell_full_dataset(
    config: &ExperimentConfig,
    cell: &Cell,
    covariates: Option<&CovariateMatrix>,
) -> Result<PricingDataset, ExperimentError> {
    let owned;
    let cov = match covariates {
        Some(c) => c,
        None => {
            owned = synthesize_covariates(config.n, config.d, config.n_dummy, cell.covariate_seed(config.seed))?;
            &owned
        }
    };
    let truth = draw_ground_truth(cell.family, cov, config.noise_sd, cell.truth_seed(config.seed))?;
    let seed = cell.seed(config.seed);
    let bias = draw_bias(cov, cell.theta, seed)?;
    Ok(generate_dataset(cov, &truth, &bias, seed)?)
}

/// Generates one cell's dataset and fits and scores every configured
/// method on it. Method failures are recorded, not propagated.
pub fn run_cell(
    config: &ExperimentConfig,
    cell: Cell,
    covariates: Option<&CovariateMatrix>,
) -> Result<CellResult, ExperimentError> {
    let start = Instant::now();
    let data = cell_dataset(config, &cell, covariates)?;
    let grid = BidGrid::from_training(&data.train, config.grid_points).map_err(|e| ExperimentError::Cell {
        family: cell.family,
        theta: cell.theta,
        repetition: cell.repetition,
        message: e.to_string(),
    })?;
    let truth = &data.train.truth;
    let seed = cell.seed(config.seed);
    let mut records = Vec::with_capacity(config.methods.len());
    let mut notes = Vec::new();
    for &method in &config.methods {
        let t0 = Instant::now();
        let mut record = Record {
            family: cell.family,
            method,
            theta: cell.theta,
            repetition: cell.repetition,
            report: MetricsReport::default(),
            hyperparameters: Hyperparameters::new(),
            error: None,
            wall_time: 0.0,
        };
        match estimators::fit(method, &data.train, &data.validation, &config.grids, seed) {
            Ok(model) => {
                record.report = evaluate_all(&model, truth, &data.test, &grid);
                record.hyperparameters = model.hyperparameters;
                notes.extend(model.notes.into_iter().map(|n| format!("{method}: {n}")));
            }
            Err(e) => {
                log::warn!("{}/{}/{}: {method} failed: {e}", cell.family, cell.theta, cell.repetition);
                notes.push(format!("{method}: failed: {e}"));
                record.error = Some(e.to_string());
            }
        }
        record.wall_time = t0.elapsed().as_secs_f64();
        records.push(record);
    }
    let wall_time = start.elapsed().as_secs_f64();
    log::info!(
        "cell {}/theta={}/rep={} done in {wall_time:.1}s",
        cell.family,
        cell.theta,
        cell.repetition
    );
    Ok(CellResult {
        cell,
        records,
        notes,
        wall_time,
    })
}

/// Records of a whole sweep, in cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub cells: Vec<CellResult>,
}

impl ResultsTable {
    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.cells.iter().flat_map(|c| c.records.iter())
    }

    pub fn failures(&self) -> Vec<&Record> {
        self.records().filter(|r| r.error.is_some()).collect()
    }

    /// Methods in order of first appearance.
    pub fn methods(&self) -> Vec<Method> {
        let mut out = Vec::new();
        for r in self.records() {
            if !out.contains(&r.method) {
                out.push(r.method);
            }
        }
        out
    }

    pub fn families(&self) -> Vec<CurveFamily> {
        let mut out = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.cell.family) {
                out.push(c.cell.family);
            }
        }
        out
    }

    /// Bias levels in ascending order.
    pub fn bias_levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.cell.theta) {
                out.push(c.cell.theta);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Mean and sample standard deviation of a metric over repetitions.
    pub fn aggregate(&self, family: CurveFamily, method: Method, theta: f64, metric: crate::evaluation::Metric) -> Option<Aggregate> {
        let values: Vec<f64> = self
            .records()
            .filter(|r| r.family == family && r.method == method && r.theta == theta)
            .filter_map(|r| r.report.get(metric))
            .collect();
        Aggregate::of(&values)
    }
}

/// Runs every cell of the sweep on `config.workers` threads.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ResultsTable, ExperimentError> {
    config.validate()?;
    let covariates = match &config.covariates {
        Some(src) => Some(load_covariates(&src.path, &src.schema)?),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let cells = config.cells();
    log::info!("running {} cells on {} workers", cells.len(), pool.current_num_threads());
    // An indexed parallel collect keeps cell order regardless of scheduling.
    let results: Result<Vec<CellResult>, ExperimentError> =
        pool.install(|| cells.into_par_iter().map(|c| run_cell(config, c, covariates.as_ref())).collect());
    Ok(ResultsTable { cells: results? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::Metric;

    fn tiny(methods: Vec<Method>) -> ExperimentConfig {
        ExperimentConfig {
            n: 200,
            d: 4,
            n_dummy: 1,
            families: vec![CurveFamily::Richards],
            bias_levels: vec![0.0],
            repetitions: 1,
            methods,
            seed: 3,
            workers: 1,
            grids: Grids::smoke(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        let partial = ExperimentConfig::from_toml("n = 500\nfamilies = [\"richards\"]\nmethods = [\"logistic\", \"drnet\"]").unwrap();
        assert_eq!(partial.n, 500);
        assert_eq!(partial.methods, vec![Method::Logistic, Method::DrNet]);
        assert!(ExperimentConfig::from_toml("repetitions = 0").is_err());
        assert!(ExperimentConfig::from_toml("bias_levels = [1.0, 1.0]").is_err());
        assert!(ExperimentConfig::from_toml("typo = 1").is_err());
    }

    #[test]
    fn naive_cell_reports_policy_error_only() {
        let t = run_sweep(&tiny(vec![Method::Naive])).unwrap();
        let r = &t.cells[0].records[0];
        assert!(r.report.pe.is_some());
        assert!(r.report.mise.is_none() && r.report.bs.is_none() && r.report.mise_r.is_none());
    }

    #[test]
    fn single_logistic_cell_gives_one_record() {
        let t = run_sweep(&tiny(vec![Method::Logistic])).unwrap();
        assert_eq!(t.records().count(), 1);
        let agg = t.aggregate(CurveFamily::Richards, Method::Logistic, 0.0, Metric::Mise).unwrap();
        assert_eq!(agg.mean, t.cells[0].records[0].report.mise.unwrap());
        assert_eq!(agg.sd, 0.0);
    }

    #[test]
    fn oracle_has_zero_mise_in_every_cell() {
        let mut c = tiny(vec![Method::Oracle]);
        c.bias_levels = vec![0.0, 10.0];
        c.families = CurveFamily::ALL.to_vec();
        c.repetitions = 2;
        let t = run_sweep(&c).unwrap();
        assert_eq!(t.records().count(), 8);
        assert!(t.records().all(|r| r.report.mise == Some(0.0) && r.report.pe == Some(0.0)));
    }

    #[test]
    fn cells_share_truth_across_bias_levels() {
        let mut c = tiny(vec![Method::Logistic]);
        c.bias_levels = vec![0.0, 20.0];
        let cells = c.cells();
        let a = cell_dataset(&c, &cells[0], None).unwrap();
        let b = cell_dataset(&c, &cells[1], None).unwrap();
        assert_eq!(a.train.truth, b.train.truth);
        assert_ne!(a.train.bias, b.train.bias);
        let again = cell_dataset(&c, &cells[0], None).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn failures_are_recorded_without_aborting() {
        let mut c = tiny(vec![Method::Logistic, Method::Mlp]);
        c.grids.mlp.batch_size = vec![10_000];
        let t = run_sweep(&c).unwrap();
        assert_eq!(t.failures().len(), 1);
        assert_eq!(t.failures()[0].method, Method::Mlp);
        assert!(t.cells[0].records[0].report.mise.is_some());
    }
}
