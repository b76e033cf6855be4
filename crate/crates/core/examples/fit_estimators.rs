//! Fits every estimator on one desk-scale dataset and scores it.
//!
//! ```text
//! cargo run --release --example fit_estimators -- [theta] [smoke]
//! ```

use std::time::Instant;

use bidlab::estimators::{fit, Grids, Method};
use bidlab::evaluation::{evaluate_all, BidGrid, Metric, GRID_POINTS};
use bidlab::experiment::{cell_dataset, Cell, ExperimentConfig};
use bidlab::synthdata::CurveFamily;

fn main() {
    let mut args = std::env::args().skip(1);
    let theta: f64 = args.next().map_or(0.0, |s| s.parse().expect("theta is a number"));
    let smoke = args.next().is_some_and(|s| s == "smoke");
    let config = ExperimentConfig {
        grids: if smoke { Grids::smoke() } else { Grids::default() },
        ..ExperimentConfig::default()
    };
    let cell = Cell {
        family: CurveFamily::StackedSigmoid,
        theta,
        repetition: 0,
    };
    let data = cell_dataset(&config, &cell, None).expect("dataset");
    let grid = BidGrid::from_training(&data.train, GRID_POINTS).expect("grid");
    println!("{} train / {} validation / {} test rows, theta = {theta}", data.train.len(), data.validation.len(), data.test.len());
    println!("{:<22}{:>8}{:>8}{:>8}{:>8}{:>9}", "method", "MISE", "MISE R", "PE", "BS", "seconds");
    for method in Method::ESTIMATORS {
        let start = Instant::now();
        let model = fit(method, &data.train, &data.validation, &config.grids, cell.seed(config.seed)).expect("fit");
        let report = evaluate_all(&model, &data.train.truth, &data.test, &grid);
        let cell = |m: Metric| report.get(m).map_or("n.a.".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<22}{:>8}{:>8}{:>8}{:>8}{:>9.1}",
            method.label(),
            cell(Metric::Mise),
            cell(Metric::MiseR),
            cell(Metric::Pe),
            cell(Metric::Bs),
            start.elapsed().as_secs_f64()
        );
    }
}
