//! Scores the ground truth, a logistic regression and naive pricing on
//! every metric, showing which metrics apply to which model.
//!
//! cargo run --example evaluate_metrics -- [theta]

use bidlab::estimators::{fit, FittedModel, Grids, Method};
use bidlab::evaluation::{evaluate_all, BidGrid, Metric, GRID_POINTS};
use bidlab::synthdata::{draw_bias, draw_ground_truth, generate_dataset, split, synthesize_covariates, CurveFamily};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta: f64 = std::env::args().nth(1).map_or(Ok(10.0), |s| s.parse())?;
    let seed = 11;
    let cov = synthesize_covariates(2000, 13, 4, seed)?;
    let truth = draw_ground_truth(CurveFamily::Richards, &cov, 0.1, seed)?;
    let bias = draw_bias(&cov, theta, seed)?;
    let data = split(&generate_dataset(&cov, &truth, &bias, seed)?, seed)?;
    let grid = BidGrid::from_training(&data.train, GRID_POINTS)?;

    let models = [
        FittedModel::oracle(truth.clone()),
        fit(Method::Logistic, &data.train, &data.validation, &Grids::default(), seed)?,
        fit(Method::Naive, &data.train, &data.validation, &Grids::default(), seed)?,
    ];
    println!("{:<22}{:>10}{:>10}{:>10}{:>10}", "model", "MISE", "MISE R", "PE", "BS");
    for model in &models {
        let report = evaluate_all(model, &truth, &data.test, &grid);
        let cells: Vec<String> = [Metric::Mise, Metric::MiseR, Metric::Pe, Metric::Bs]
            .iter()
            .map(|&m| report.get(m).map_or_else(|| format!("{:>10}", "n.a."), |v| format!("{v:>10.4}")))
            .collect();
        println!("{:<22}{}", model.method.label(), cells.concat());
    }
    Ok(())
}
