//! Command-line interface.
//!
//! Flags override the matching keys of a `--config` file, which override
//! the built-in defaults. Exit codes: 0 on success, 1 for usage errors
//! (including metrics a method cannot be scored on), 2 for runtime failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::estimators::{self, FittedModel, Method};
use crate::evaluation::{evaluate_all, evaluate_metric, BidGrid, Metric, MetricError};
use crate::experiment::{
    cell_full_dataset, emit_table, run_sweep, write_results_csv, write_run_log, Cell, ExperimentConfig, TableFormat,
};
use crate::response::BidResponse;
use crate::synthdata::{read_dataset_csv, split, write_dataset_csv, CurveFamily, DatasetSpec, PricingDataset, SplitDataset};

#[derive(Debug, Parser)]
#[command(name = "bidlab", version, about = "Bid-response estimation under bid selection bias")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "BIDLAB_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset CSV and its spec document.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value = "richards")]
        family: CurveFamily,
        /// Number of rows; defaults to the config value.
        #[arg(long)]
        n: Option<usize>,
        /// File stem for `<name>.csv` and `<name>.toml`.
        #[arg(long, default_value = "dataset")]
        name: String,
    },
    /// Fit one method on a generated dataset and save the model as JSON.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Method,
        /// Model file; defaults to `model_<method>.json` in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score a saved model on the test split of its dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Single metric; all applicable metrics when omitted.
        #[arg(long)]
        metric: Option<Metric>,
    },
    /// Run the bias sweep and write results, run log and tables.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        workers: Option<usize>,
        /// Restrict the sweep to one bias level.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        family: Option<CurveFamily>,
        /// Restrict the sweep to one method.
        #[arg(long)]
        method: Option<Method>,
        /// Emit only this metric's table.
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long, default_value = "markdown")]
        format: TableFormat,
    },
    /// Print `(b, μ, μ̂)` over the bid grid for one test row.
    InspectCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Index into the test split.
        #[arg(long, default_value_t = 0)]
        row: usize,
    },
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn runtime(context: &str) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn spec_path(data: &Path) -> PathBuf {
    data.with_extension("toml")
}

/// Reads a dataset CSV and the spec document next to it, then splits it
/// exactly as the sweep does.
fn load_dataset(data: &Path) -> Result<SplitDataset, CliError> {
    let spec_file = spec_path(data);
    let text = fs::read_to_string(&spec_file).map_err(|e| CliError::Usage(format!("{}: {e}", spec_file.display())))?;
    let spec = DatasetSpec::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", spec_file.display())))?;
    let file = fs::File::open(data).map_err(|e| CliError::Usage(format!("{}: {e}", data.display())))?;
    let full: PricingDataset = read_dataset_csv(file, &spec).map_err(|e| runtime("reading dataset")(e.to_string()))?;
    split(&full, full.seed).map_err(|e| runtime("splitting dataset")(e.to_string()))
}

fn load_model(path: &Path) -> Result<FittedModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    FittedModel::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn grid_for(data: &SplitDataset, config: &ExperimentConfig) -> Result<BidGrid, CliError> {
    BidGrid::from_training(&data.train, config.grid_points).map_err(|e| runtime("bid grid")(e.to_string()))
}

/// Runs a parsed command, writing human output to `out`.
pub fn execute(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let print = |out: &mut dyn std::io::Write, s: &str| {
        let _ = writeln!(out, "{s}");
    };
    match cli.command {
        Command::Generate {
            common,
            theta,
            family,
            n,
            name,
        } => {
            let mut config = load_config(&common)?;
            if let Some(n) = n {
                config.n = n;
            }
            if !(theta >= 0.0 && theta.is_finite()) {
                return Err(CliError::Usage(format!("theta must be >= 0, got {theta}")));
            }
            config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let cell = Cell {
                family,
                theta,
                repetition: 0,
            };
            let data = cell_full_dataset(&config, &cell, None).map_err(|e| runtime("generate")(e.to_string()))?;
            let mut csv = Vec::new();
            write_dataset_csv(&data, &mut csv).map_err(|e| runtime("generate")(e.to_string()))?;
            let spec = DatasetSpec::of(&data).to_toml().map_err(|e| runtime("generate")(e.to_string()))?;
            let csv_path = common.out_dir.join(format!("{name}.csv"));
            write_file(&csv_path, &csv)?;
            write_file(&spec_path(&csv_path), spec.as_bytes())?;
            print(out, &format!("wrote {} rows to {}", data.len(), csv_path.display()));
        }
        Command::Fit {
            common,
            data,
            method,
            model,
        } => {
            let config = load_config(&common)?;
            let split_data = load_dataset(&data)?;
            let seed = common.seed.unwrap_or(split_data.train.seed);
            let fitted = estimators::fit(method, &split_data.train, &split_data.validation, &config.grids, seed)
                .map_err(|e| runtime(&format!("fitting {method}"))(e.to_string()))?;
            let path = model.unwrap_or_else(|| common.out_dir.join(format!("model_{}.json", method.name())));
            let json = fitted.to_json().map_err(|e| runtime("serializing model")(e.to_string()))?;
            write_file(&path, json.as_bytes())?;
            for note in &fitted.notes {
                log::info!("{method}: {note}");
            }
            print(out, &format!("wrote {} model to {}", method.label(), path.display()));
        }
        Command::Evaluate {
            common,
            data,
            model,
            metric,
        } => {
            let config = load_config(&common)?;
            let split_data = load_dataset(&data)?;
            let fitted = load_model(&model)?;
            let grid = grid_for(&split_data, &config)?;
            let truth = &split_data.train.truth;
            match metric {
                Some(metric) => {
                    let value = evaluate_metric(&fitted, truth, &split_data.test, &grid, metric).map_err(|e| match e {
                        MetricError::NotApplicable { .. } => CliError::Usage(e.to_string()),
                        other => CliError::Runtime(other.to_string()),
                    })?;
                    print(out, &format!("{metric},{value}"));
                }
                None => {
                    let report = evaluate_all(&fitted, truth, &split_data.test, &grid);
                    for (k, v) in report.to_record() {
                        print(out, &format!("{k},{v}"));
                    }
                }
            }
        }
        Command::Sweep {
            common,
            workers,
            theta,
            family,
            method,
            metric,
            format,
        } => {
            let mut config = load_config(&common)?;
            if let Some(w) = workers {
                config.workers = w;
            }
            if let Some(t) = theta {
                config.bias_levels = vec![t];
            }
            if let Some(f) = family {
                config.families = vec![f];
            }
            if let Some(m) = method {
                config.methods = vec![m];
            }
            config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let table = run_sweep(&config).map_err(|e| runtime("sweep")(e.to_string()))?;
            let dir = &common.out_dir;
            let mut csv = Vec::new();
            write_results_csv(&table, &mut csv).map_err(|e| runtime("results")(e.to_string()))?;
            write_file(&dir.join("results.csv"), &csv)?;
            let mut log = Vec::new();
            write_run_log(&table, &mut log).map_err(|e| runtime("run log")(e.to_string()))?;
            write_file(&dir.join("run.log"), &log)?;
            let ext = match format {
                TableFormat::Csv => "csv",
                TableFormat::Markdown => "md",
            };
            let metrics = metric.map_or_else(|| Metric::ALL.to_vec(), |m| vec![m]);
            for m in metrics {
                let doc = emit_table(&table, m, format).map_err(|e| runtime("table")(e.to_string()))?;
                write_file(&dir.join(format!("table_{}.{ext}", m.name())), doc.as_bytes())?;
                print(out, &doc);
            }
            let failed = table.failures().len();
            if failed > 0 {
                log::warn!("{failed} method fits failed; see run.log");
            }
            print(out, &format!("wrote results to {}", dir.display()));
        }
        Command::InspectCurve {
            common,
            data,
            model,
            row,
        } => {
            let config = load_config(&common)?;
            let split_data = load_dataset(&data)?;
            let fitted = load_model(&model)?;
            if row >= split_data.test.len() {
                return Err(CliError::Usage(format!(
                    "row {row} out of range for {} test rows",
                    split_data.test.len()
                )));
            }
            let grid = grid_for(&split_data, &config)?;
            let x = split_data.test.row(row);
            let truth = split_data.train.truth.curve(grid.values(), x);
            let est = fitted.curve(grid.values(), x).map_err(|e| CliError::Usage(e.to_string()))?;
            print(out, "b,mu,mu_hat");
            for ((b, t), e) in grid.values().iter().zip(truth).zip(est) {
                print(out, &format!("{b},{t},{e}"));
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
