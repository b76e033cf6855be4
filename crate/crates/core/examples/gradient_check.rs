//! Compares backpropagated gradients of the three network estimators with
//! central finite differences on a small random instance.
//!
//! cargo run --example gradient_check

use bidlab::estimators::{DrNetConfig, DrNetModel, StrataLayout, VcNetConfig, VcNetModel};
use bidlab::netcore::{loss_and_gradient, DenseNetwork, Samples, TrainConfig, Trainable};
use bidlab::rng::stream_rng;
use bidlab::synthdata::{draw_bias, draw_ground_truth, generate_dataset, synthesize_covariates, CurveFamily};

fn check<M: Trainable>(name: &str, model: &mut M, samples: &Samples<'_>) {
    let rows: Vec<usize> = (0..samples.len()).collect();
    let (loss, grad) = loss_and_gradient(model, samples, &rows);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for j in 0..grad.len() {
        let orig = model.params()[j];
        model.params_mut()[j] = orig + h;
        let up = loss_and_gradient(model, samples, &rows).0;
        model.params_mut()[j] = orig - h;
        let down = loss_and_gradient(model, samples, &rows).0;
        model.params_mut()[j] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(1e-7));
    }
    println!("{name:<6} {:>5} params  loss {loss:.4}  worst relative error {worst:.2e}", grad.len());
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cov = synthesize_covariates(64, 5, 1, 2)?;
    let truth = draw_ground_truth(CurveFamily::Richards, &cov, 0.1, 2)?;
    let data = generate_dataset(&cov, &truth, &draw_bias(&cov, 3.0, 2)?, 2)?;
    let targets: Vec<f64> = (0..data.len()).map(|i| data.outcome(i)).collect();
    let samples = Samples::new(data.covariates.values(), data.dim(), &data.bids, &targets)?;
    let train = TrainConfig {
        batch_size: 16,
        steps: 1,
        learning_rate: 0.01,
        seed: 0,
    };

    let mut mlp = DenseNetwork::init(DenseNetwork::mlp_architecture(data.dim() + 1, &[8, 8]), &mut stream_rng(2, 0));
    check("MLP", &mut mlp, &samples);

    let cfg = DrNetConfig {
        strata: 4,
        representation_layers: 2,
        inference_layers: 2,
        width: 8,
        train,
    };
    let (body, head) = DrNetModel::architectures(data.dim(), &cfg)?;
    check("DRNet", &mut DrNetModel::init(body, head, StrataLayout::even(4), 2), &samples);

    let cfg = VcNetConfig {
        body_layers: 2,
        width: 8,
        train,
    };
    check("VCNet", &mut VcNetModel::init(VcNetModel::architecture(data.dim(), &cfg)?, 2), &samples);
    Ok(())
}
