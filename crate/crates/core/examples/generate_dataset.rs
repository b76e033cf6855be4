//! Draws a synthetic pricing dataset, writes it as CSV plus its spec
//! document, and prints a few summary statistics.
//!
//! cargo run --example generate_dataset -- [theta] [out_dir]

use std::fs::File;
use std::path::PathBuf;

use bidlab::synthdata::{
    draw_bias, draw_ground_truth, generate_dataset, synthesize_covariates, write_dataset_csv, CurveFamily,
    DatasetSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let theta: f64 = args.next().map_or(Ok(5.0), |s| s.parse())?;
    let out: PathBuf = args.next().map_or_else(std::env::temp_dir, PathBuf::from);

    let seed = 7;
    let cov = synthesize_covariates(2000, 13, 4, seed)?;
    let truth = draw_ground_truth(CurveFamily::StackedSigmoid, &cov, 0.1, seed)?;
    let bias = draw_bias(&cov, theta, seed)?;
    let data = generate_dataset(&cov, &truth, &bias, seed)?;

    let csv = out.join("example_dataset.csv");
    write_dataset_csv(&data, File::create(&csv)?)?;
    std::fs::write(out.join("example_dataset.toml"), DatasetSpec::of(&data).to_toml()?)?;

    let (lo, hi) = data.bid_range();
    let mean_bid = data.bids.iter().sum::<f64>() / data.len() as f64;
    println!("wrote {} rows to {}", data.len(), csv.display());
    println!("theta {theta}: bids in [{lo:.3}, {hi:.3}], mean {mean_bid:.3}, acceptance rate {:.3}", data.positive_rate());
    Ok(())
}
