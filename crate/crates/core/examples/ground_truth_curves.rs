//! Prints the true bid-response curves of a few customers for both curve
//! families, with each curve's revenue-optimal bid, and checks the shape
//! requirements over the whole covariate sample.
//!
//! cargo run --example ground_truth_curves

use bidlab::evaluation::{optimal_bid, BidGrid};
use bidlab::synthdata::{check_requirements, draw_ground_truth, synthesize_covariates, CurveFamily};
use bidlab::BidResponse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cov = synthesize_covariates(500, 13, 4, 3)?;
    let grid = BidGrid::unit(11)?;
    for family in [CurveFamily::Richards, CurveFamily::StackedSigmoid] {
        let truth = draw_ground_truth(family, &cov, 0.1, 3)?;
        println!("{family}");
        let header: Vec<String> = grid.values().iter().map(|b| format!("{b:5.1}")).collect();
        println!("  row  {}   b*", header.join(" "));
        for i in 0..5 {
            let x = cov.row(i);
            let curve: Vec<String> = truth.curve(grid.values(), x).iter().map(|p| format!("{p:5.2}")).collect();
            let best = optimal_bid(|b| truth.response(b, x), &BidGrid::unit(65)?);
            println!("  {i:3}  {}  {best:.3}", curve.join(" "));
        }
        let report = check_requirements(&truth, cov.iter_rows(), 65);
        println!(
            "  requirements over {} rows: {} violations, slope spread {:.3}\n",
            report.rows_checked,
            report.violations(),
            report.slope_spread
        );
    }
    Ok(())
}
