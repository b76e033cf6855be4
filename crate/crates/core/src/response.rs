/// Anything that maps a bid and a covariate row to an acceptance probability.
///
/// Implemented by the synthetic ground truth, by fitted estimators and by
/// plain closures in tests.
pub trait BidResponse {
    fn response(&self, bid: f64, x: &[f64]) -> f64;

    /// The response curve of one row over a set of bids.
    fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        bids.iter().map(|&b| self.response(b, x)).collect()
    }
}

impl<F> BidResponse for F
where
    F: Fn(f64, &[f64]) -> f64,
{
    fn response(&self, bid: f64, x: &[f64]) -> f64 {
        self(bid, x)
    }
}
