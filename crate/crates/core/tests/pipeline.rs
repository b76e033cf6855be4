use bidlab::estimators::{fit, FittedModel, Grids, Method};
use bidlab::evaluation::{evaluate_all, BidGrid, GRID_POINTS};
use bidlab::experiment::{cell_dataset, run_cell, Cell, ExperimentConfig};
use bidlab::synthdata::CurveFamily;

fn config() -> ExperimentConfig {
    ExperimentConfig {
        n: 400,
        d: 6,
        n_dummy: 2,
        grids: Grids::smoke(),
        seed: 31,
        ..ExperimentConfig::default()
    }
}

#[test]
fn every_estimator_fits_scores_and_round_trips() {
    let config = config();
    let cell = Cell {
        family: CurveFamily::Richards,
        theta: 7.5,
        repetition: 0,
    };
    let data = cell_dataset(&config, &cell, None).unwrap();
    let grid = BidGrid::from_training(&data.train, GRID_POINTS).unwrap();
    let truth = &data.train.truth;
    for method in Method::ESTIMATORS {
        let model = fit(method, &data.train, &data.validation, &config.grids, cell.seed(config.seed)).unwrap();
        let report = evaluate_all(&model, truth, &data.test, &grid);
        if method.predicts_response() {
            let (mise, mise_r) = (report.mise.unwrap(), report.mise_r.unwrap());
            assert!(mise.is_finite() && mise > 0.0, "{method}: {mise}");
            assert!(mise_r <= mise, "{method}");
            assert!((0.0..=1.0).contains(&report.bs.unwrap()));
        } else {
            assert!(report.mise.is_none() && report.bs.is_none());
        }
        assert!(report.pe.unwrap() >= 0.0);

        let restored = FittedModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(restored.method, method);
        assert_eq!(evaluate_all(&restored, truth, &data.test, &grid), report, "{method}");
    }
}

#[test]
fn cell_runs_are_repeatable_and_bias_sensitive() {
    let mut config = config();
    config.methods = vec![Method::Naive, Method::Logistic, Method::Hie];
    let cell = |theta| Cell {
        family: CurveFamily::StackedSigmoid,
        theta,
        repetition: 1,
    };
    let a = run_cell(&config, cell(0.0), None).unwrap();
    let b = run_cell(&config, cell(0.0), None).unwrap();
    let reports = |c: &bidlab::experiment::CellResult| c.records.iter().map(|r| r.report).collect::<Vec<_>>();
    assert_eq!(reports(&a), reports(&b));

    // Heavy bias pulls factual bids towards each customer's modal bid.
    let spread = |theta| {
        let d = cell_dataset(&config, &cell(theta), None).unwrap();
        let t = &d.train;
        let gaps: f64 = (0..t.len()).map(|i| (t.bids[i] - t.bias.modal_bid(t.row(i))).powi(2)).sum();
        (gaps / t.len() as f64).sqrt()
    };
    assert!(spread(20.0) < 0.5 * spread(0.0));
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let desk = ExperimentConfig::from_toml(&std::fs::read_to_string(dir.join("desk.toml")).unwrap()).unwrap();
    assert_eq!(desk, ExperimentConfig::default());
    let full = ExperimentConfig::from_toml(&std::fs::read_to_string(dir.join("full.toml")).unwrap()).unwrap();
    assert_eq!(full.n, 12_000);
}
