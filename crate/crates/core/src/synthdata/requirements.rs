//! Checks of the four shape requirements a ground-truth surface must meet:
//! acceptance at the lowest bid at most 1, at the highest bid at least 0,
//! heterogeneous price sensitivity, and a non-increasing response.

use super::GroundTruthSpec;
use crate::response::BidResponse;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequirementReport {
    pub rows_checked: usize,
    pub upper_bound_violations: usize,
    pub lower_bound_violations: usize,
    pub monotonicity_violations: usize,
    /// Largest pairwise gap between finite-difference slopes at `b = δ`.
    pub slope_spread: f64,
}

impl RequirementReport {
    pub fn heterogeneous(&self) -> bool {
        self.slope_spread > 1e-3
    }

    pub fn violations(&self) -> usize {
        self.upper_bound_violations
            + self.lower_bound_violations
            + self.monotonicity_violations
            + usize::from(!self.heterogeneous())
    }
}

pub fn check_requirements<'a>(
    truth: &GroundTruthSpec,
    rows: impl IntoIterator<Item = &'a [f64]>,
    grid_points: usize,
) -> RequirementReport {
    let grid: Vec<f64> = (0..grid_points)
        .map(|k| k as f64 / (grid_points - 1) as f64)
        .collect();
    let h = 1e-4;
    let mut report = RequirementReport::default();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in rows {
        report.rows_checked += 1;
        let curve = truth.curve(&grid, x);
        if curve[0] > 1.0 {
            report.upper_bound_violations += 1;
        }
        if curve[grid_points - 1] < 0.0 {
            report.lower_bound_violations += 1;
        }
        if curve.windows(2).any(|w| w[1] > w[0] + 1e-9) {
            report.monotonicity_violations += 1;
        }
        let delta = truth.params(x).delta;
        let (a, b) = ((delta - h).max(0.0), (delta + h).min(1.0));
        let slope = (truth.response(b, x) - truth.response(a, x)) / (b - a);
        lo = lo.min(slope);
        hi = hi.max(slope);
    }
    report.slope_spread = if report.rows_checked > 1 { hi - lo } else { 0.0 };
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{draw_ground_truth, synthesize_covariates, CurveFamily};

    #[test]
    fn drawn_surfaces_meet_all_requirements() {
        let cov = synthesize_covariates(400, 13, 4, 21).unwrap();
        for family in CurveFamily::ALL {
            for seed in 0..5 {
                let t = draw_ground_truth(family, &cov, 0.1, seed).unwrap();
                let r = check_requirements(&t, cov.iter_rows().take(100), 65);
                assert_eq!(r.violations(), 0, "{family} seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn identical_curves_are_not_heterogeneous() {
        let cov = synthesize_covariates(50, 2, 0, 1).unwrap();
        let mut t = draw_ground_truth(CurveFamily::Richards, &cov, 0.1, 1).unwrap();
        // Every row gets the same curve once the weights are zero.
        t.w1 = vec![0.0; 2];
        t.w2 = vec![0.0; 2];
        t.w3 = vec![0.0; 2];
        t.w4 = vec![0.0; 2];
        let r = check_requirements(&t, cov.iter_rows(), 65);
        assert!(!r.heterogeneous());
    }
}
