//! Deterministic reductions and Monte Carlo error bars.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

pub const DEFAULT_BATCHES: usize = 30;

/// A Monte Carlo estimate with its heuristic standard error and the seed
/// coordinates that reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
    pub master_seed: u64,
    pub stream_start: u64,
    pub stream_count: u64,
    /// Some function value was clipped to the configured bound.
    pub clipped: bool,
}

impl EstimateWithError {
    /// `|a − b| ≤ k·sqrt(se_a² + se_b²)`.
    pub fn agrees_with(&self, other: &Self, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.std_error.hypot(other.std_error)
    }
}

/// Pairwise summation over a fixed binary split; the result depends only
/// on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean for independent samples.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Streaming batch means over a series of known length: sample `k` falls in
/// batch `k·B/n`.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    total: usize,
    seen: usize,
    sums: Vec<CompensatedSum>,
    counts: Vec<usize>,
}

impl BatchMeans {
    pub fn new(total: usize, batches: usize) -> Self {
        let b = batches.min(total).max(1);
        Self {
            total: total.max(1),
            seen: 0,
            sums: vec![CompensatedSum::default(); b],
            counts: vec![0; b],
        }
    }

    pub fn push(&mut self, v: f64) {
        let b = (self.seen * self.sums.len() / self.total).min(self.sums.len() - 1);
        self.sums[b].add(v);
        self.counts[b] += 1;
        self.seen += 1;
    }

    pub fn len(&self) -> usize {
        self.seen
    }

    pub fn is_empty(&self) -> bool {
        self.seen == 0
    }

    /// Overall mean and the batch-means standard error.
    pub fn finish(&self) -> (f64, f64) {
        let sums: Vec<f64> = self.sums.iter().map(CompensatedSum::value).collect();
        let mean = pairwise_sum(&sums) / self.seen as f64;
        let means: Vec<f64> = sums
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s / c as f64)
            .collect();
        let (_, se) = mean_and_se(&means);
        (mean, se)
    }
}

/// Runs `f(stream)` for `stream ∈ start..start+count` on the rayon pool and
/// returns the results in stream order.
pub fn par_streams<T, F>(start: u64, count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (start..start + count).into_par_iter().map(f).collect()
}

/// Clips `v` to `[-bound, bound]`, reporting whether it had to.
pub fn clip(v: f64, bound: f64) -> (f64, bool) {
    if v > bound {
        (bound, true)
    } else if v < -bound {
        (-bound, true)
    } else {
        (v, false)
    }
}

/// Empirical quantile by the nearest-rank rule on a sorted copy.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn batch_means_of_constant() {
        let mut b = BatchMeans::new(1000, 30);
        for _ in 0..1000 {
            b.push(0.25);
        }
        let (m, se) = b.finish();
        assert_eq!(m, 0.25);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn batch_means_small_series() {
        let mut b = BatchMeans::new(3, 30);
        for v in [1.0, 2.0, 3.0] {
            b.push(v);
        }
        let (m, se) = b.finish();
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quantiles() {
        let xs = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.9), 5.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
    }

    #[test]
    fn clipping() {
        assert_eq!(clip(3.0, 2.0), (2.0, true));
        assert_eq!(clip(-3.0, 2.0), (-2.0, true));
        assert_eq!(clip(1.0, 2.0), (1.0, false));
    }

    #[test]
    fn par_streams_keeps_order() {
        let v = par_streams(5, 100, |s| Ok(s * 2)).unwrap();
        assert_eq!(v, (5..105).map(|s| s * 2).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn pairwise_matches_naive(xs in proptest::collection::vec(-1e3f64..1e3, 0..200)) {
            let naive: f64 = xs.iter().sum();
            prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-9);
        }

        #[test]
        fn mean_se_nonnegative(xs in proptest::collection::vec(-1e3f64..1e3, 1..100)) {
            let (m, se) = mean_and_se(&xs);
            prop_assert!(se >= 0.0);
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
        }
    }
}
