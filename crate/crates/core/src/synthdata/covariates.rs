use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::rng::{stream, stream_rng};

/// How a covariate column was produced before standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Dummy,
}

impl std::str::FromStr for ColumnKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" | "c" => Ok(ColumnKind::Continuous),
            "dummy" | "d" | "binary" => Ok(ColumnKind::Dummy),
            other => Err(DataError::Argument(format!("unknown column kind `{other}`"))),
        }
    }
}

/// Standardized customer features, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    kinds: Vec<ColumnKind>,
    names: Vec<String>,
}

impl CovariateMatrix {
    /// Wraps already-standardized values. No standardization is applied.
    pub fn from_standardized(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        kinds: Vec<ColumnKind>,
    ) -> Result<Self, DataError> {
        if values.len() != rows * cols {
            return Err(DataError::Argument(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if kinds.len() != cols {
            return Err(DataError::Argument(format!(
                "{} column kinds for {cols} columns",
                kinds.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Ingestion {
                row: pos / cols.max(1),
                column: pos % cols.max(1),
                reason: "non-finite value".into(),
            });
        }
        let names = (0..cols).map(|j| format!("x_{j}")).collect();
        Ok(Self {
            rows,
            cols,
            values,
            kinds,
            names,
        })
    }

    /// Standardizes each column of `raw` (row-major) to mean 0 and unit
    /// sample standard deviation.
    pub fn standardize(
        rows: usize,
        cols: usize,
        mut raw: Vec<f64>,
        kinds: Vec<ColumnKind>,
    ) -> Result<Self, DataError> {
        if rows < 2 {
            return Err(DataError::Argument(
                "standardization needs at least two rows".into(),
            ));
        }
        for j in 0..cols {
            let (mean, sd) = column_moments(&raw, rows, cols, j);
            if sd <= 1e-12 * mean.abs().max(1.0) {
                return Err(DataError::ZeroVariance { column: j });
            }
            for i in 0..rows {
                let v = &mut raw[i * cols + j];
                *v = (*v - mean) / sd;
            }
        }
        Self::from_standardized(rows, cols, raw, kinds)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Sample mean and standard deviation (n - 1 denominator) of column `j`.
    pub fn column_moments(&self, j: usize) -> (f64, f64) {
        column_moments(&self.values, self.rows, self.cols, j)
    }

    /// Copies the given rows into a new matrix. Values are not re-standardized.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            values,
            kinds: self.kinds.clone(),
            names: self.names.clone(),
        }
    }

    fn with_names(mut self, names: Vec<String>) -> Self {
        self.names = names;
        self
    }
}

fn column_moments(values: &[f64], rows: usize, cols: usize, j: usize) -> (f64, f64) {
    let n = rows as f64;
    let mean = (0..rows).map(|i| values[i * cols + j]).sum::<f64>() / n;
    let ss = (0..rows)
        .map(|i| (values[i * cols + j] - mean).powi(2))
        .sum::<f64>();
    let sd = if rows > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

/// Draws a stand-in covariate matrix: `d - n_dummy` standard normal columns
/// followed by `n_dummy` Bernoulli columns, each with its own success rate
/// in [0.1, 0.9]; every column is then standardized.
pub fn synthesize_covariates(
    n: usize,
    d: usize,
    n_dummy: usize,
    seed: u64,
) -> Result<CovariateMatrix, DataError> {
    if n < 10 {
        return Err(DataError::Argument(format!("need n >= 10 rows, got {n}")));
    }
    if d == 0 || n_dummy >= d {
        return Err(DataError::Argument(format!(
            "need 0 <= n_dummy < d, got n_dummy={n_dummy}, d={d}"
        )));
    }
    let mut rng = stream_rng(seed, stream::COVARIATES);
    let n_cont = d - n_dummy;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    for _ in 0..n_cont {
        columns.push((0..n).map(|_| rng.sample(StandardNormal)).collect());
    }
    for _ in 0..n_dummy {
        let q: f64 = rng.random_range(0.1..=0.9);
        let coin = Bernoulli::new(q).expect("q lies in [0.1, 0.9]");
        // A constant draw cannot be standardized; redraw until both levels occur.
        loop {
            let col: Vec<f64> = (0..n)
                .map(|_| if coin.sample(&mut rng) { 1.0 } else { 0.0 })
                .collect();
            let ones = col.iter().filter(|&&v| v == 1.0).count();
            if ones > 0 && ones < n {
                columns.push(col);
                break;
            }
        }
    }
    let mut raw = vec![0.0; n * d];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            raw[i * d + j] = *v;
        }
    }
    let mut kinds = vec![ColumnKind::Continuous; n_cont];
    kinds.extend(std::iter::repeat_n(ColumnKind::Dummy, n_dummy));
    CovariateMatrix::standardize(n, d, raw, kinds)
}

/// Reads a CSV file (header row, numeric cells) and standardizes it.
pub fn load_covariates(
    path: impl AsRef<Path>,
    schema: &[ColumnKind],
) -> Result<CovariateMatrix, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    read_covariates(file, schema)
}

/// Same as [`load_covariates`] for any reader.
pub fn read_covariates<R: Read>(
    reader: R,
    schema: &[ColumnKind],
) -> Result<CovariateMatrix, DataError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = csv
        .headers()
        .map_err(|e| DataError::Io(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let cols = headers.len();
    if schema.len() != cols {
        return Err(DataError::Argument(format!(
            "schema lists {} columns but the header has {cols}",
            schema.len()
        )));
    }
    let mut raw = Vec::new();
    let mut rows = 0;
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(|e| DataError::Io(e.to_string()))?;
        if record.len() != cols {
            return Err(DataError::Ingestion {
                row: i,
                column: record.len().min(cols),
                reason: format!("expected {cols} cells, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
            {
                return Err(DataError::Ingestion {
                    row: i,
                    column: j,
                    reason: "missing value".into(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                row: i,
                column: j,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    row: i,
                    column: j,
                    value: cell.to_string(),
                });
            }
            if schema[j] == ColumnKind::Dummy && v != 0.0 && v != 1.0 {
                return Err(DataError::NotBinary { row: i, column: j });
            }
            raw.push(v);
        }
        rows += 1;
    }
    Ok(CovariateMatrix::standardize(rows, cols, raw, schema.to_vec())?.with_names(headers))
}
