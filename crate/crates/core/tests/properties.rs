use bidlab::evaluation::{mise, mise_revenue, revenue_argmax, BidGrid};
use bidlab::experiment::Aggregate;
use bidlab::synthdata::{beta_shapes, draw_bias, draw_ground_truth, generate_dataset, synthesize_covariates, CurveFamily};
use bidlab::BidResponse;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_shapes_put_the_mode_at_phi(theta in 0.01f64..50.0, phi in 0.05f64..0.95) {
        let (a, b) = beta_shapes(theta, phi).unwrap();
        prop_assert!(a > 1.0 && b > 1.0);
        prop_assert!(((a - 1.0) / (a + b - 2.0) - phi).abs() < 1e-12);
    }

    #[test]
    fn constant_curves_integrate_exactly(lo in 0.0f64..0.5, width in 0.01f64..0.5, c1 in 0.0f64..1.0, c2 in 0.0f64..1.0) {
        let hi = lo + width;
        let cov = synthesize_covariates(20, 3, 1, 1).unwrap();
        let truth = draw_ground_truth(CurveFamily::Richards, &cov, 0.0, 1).unwrap();
        let data = generate_dataset(&cov, &truth, &draw_bias(&cov, 0.0, 1).unwrap(), 1).unwrap();
        let grid = BidGrid::new(lo, hi, 65).unwrap();
        let (a, b) = (move |_: f64, _: &[f64]| c1, move |_: f64, _: &[f64]| c2);
        let d2 = (c1 - c2).powi(2);
        prop_assert!((mise(&a, &b, &data, &grid) - d2 * (hi - lo)).abs() < 1e-12);
        prop_assert!((mise_revenue(&a, &b, &data, &grid) - d2 * (hi.powi(3) - lo.powi(3)) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn revenue_argmax_is_a_maximum(probs in prop::collection::vec(0.0f64..1.0, 3..40)) {
        let bids: Vec<f64> = (0..probs.len()).map(|k| k as f64 / (probs.len() - 1) as f64).collect();
        let k = revenue_argmax(&bids, &probs);
        let best = bids[k] * probs[k];
        prop_assert!(bids.iter().zip(&probs).all(|(b, p)| b * p <= best));
        prop_assert!(bids[..k].iter().zip(&probs).all(|(b, p)| b * p < best));
    }

    #[test]
    fn aggregate_mean_lies_in_range(values in prop::collection::vec(-1e3f64..1e3, 1..30)) {
        let a = Aggregate::of(&values).unwrap();
        prop_assert!(a.min <= a.mean && a.mean <= a.max);
        prop_assert!(a.sd >= 0.0);
        prop_assert_eq!(a.count, values.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn true_curves_are_probabilities_and_non_increasing(seed in any::<u64>(), stacked in any::<bool>()) {
        let family = if stacked { CurveFamily::StackedSigmoid } else { CurveFamily::Richards };
        let cov = synthesize_covariates(50, 6, 2, seed).unwrap();
        let truth = draw_ground_truth(family, &cov, 0.1, seed).unwrap();
        let bids: Vec<f64> = (0..201).map(|k| k as f64 / 200.0).collect();
        for x in cov.iter_rows() {
            let c = truth.curve(&bids, x);
            prop_assert!(c.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!(c.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
