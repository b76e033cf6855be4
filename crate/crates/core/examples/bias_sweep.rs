//! A small bias sweep with the fast estimators, printed as markdown
//! tables. Pass `all` to include the neural estimators (much slower).
//!
//! cargo run --release --example bias_sweep -- [all]

use bidlab::estimators::{Grids, Method};
use bidlab::evaluation::Metric;
use bidlab::experiment::{emit_table, run_sweep, ExperimentConfig, TableFormat};
use bidlab::synthdata::CurveFamily;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let all = std::env::args().nth(1).as_deref() == Some("all");
    let methods = if all {
        Method::ESTIMATORS.to_vec()
    } else {
        vec![Method::Naive, Method::Logistic, Method::RandomForest, Method::Hie]
    };
    let config = ExperimentConfig {
        n: 1000,
        families: vec![CurveFamily::StackedSigmoid],
        bias_levels: vec![0.0, 5.0, 10.0, 20.0],
        repetitions: 2,
        methods,
        grids: if all { Grids::default() } else { Grids::smoke() },
        ..ExperimentConfig::default()
    };
    let table = run_sweep(&config)?;
    for metric in [Metric::Mise, Metric::Pe, Metric::Bs] {
        print!("{}", emit_table(&table, metric, TableFormat::Markdown)?);
    }
    Ok(())
}
