//! Roundtrip statistics with exponential forgetting.

use crate::time::Duration;

pub const DEFAULT_FORGETTING: f64 = 0.99;

/// Weighted online mean/variance of roundtrip times (Welford with forgetting).
///
/// Older samples are down-weighted by `lambda` per new sample, so the sample
/// `k` steps in the past carries weight `lambda^k`. With `lambda = 1` this is
/// the plain Welford accumulator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaStats {
    weight: f64,
    mean: f64,
    m2: f64,
}

impl Default for DeltaStats {
    fn default() -> Self {
        DeltaStats::new()
    }
}

impl DeltaStats {
    pub const fn new() -> Self {
        DeltaStats {
            weight: 0.0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    /// Seeds an accumulator with a prior mean and variance worth `weight` samples.
    pub fn seeded(mean: f64, variance: f64, weight: f64) -> Self {
        let weight = weight.max(0.0);
        DeltaStats {
            weight,
            mean,
            m2: variance.max(0.0) * (weight - 1.0).max(0.0),
        }
    }

    pub fn push(&mut self, x: f64, lambda: f64) {
        self.weight = lambda * self.weight + 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.weight;
        self.m2 = lambda * self.m2 + delta * (x - self.mean);
    }

    pub fn push_duration(&mut self, d: Duration, lambda: f64) {
        self.push(d.as_nanos_f64(), lambda);
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn is_empty(&self) -> bool {
        self.weight == 0.0
    }

    /// True once at least two samples contributed.
    pub fn has_spread(&self) -> bool {
        self.weight > 1.0
    }

    pub fn variance(&self) -> f64 {
        if self.has_spread() {
            (self.m2 / (self.weight - 1.0)).max(0.0)
        } else {
            0.0
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn mean_duration(&self) -> Duration {
        Duration(self.mean.round() as i64)
    }

    pub fn std_duration(&self) -> Duration {
        Duration(self.std_dev().round() as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_without_forgetting() {
        let mut s = DeltaStats::new();
        for x in [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0] {
            s.push(x, 1.0);
        }
        assert_eq!(s.weight(), 8.0);
        assert!((s.mean() - 5.0).abs() < 1e-12);
        assert!((s.variance() - 32.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn single_sample_has_no_spread() {
        let mut s = DeltaStats::new();
        s.push(3.0, DEFAULT_FORGETTING);
        assert!(!s.has_spread());
        assert_eq!(s.variance(), 0.0);
    }

    #[test]
    fn seeded_prior_reports_given_moments() {
        let s = DeltaStats::seeded(10.0, 4.0, 10.0);
        assert_eq!(s.mean(), 10.0);
        assert!((s.variance() - 4.0).abs() < 1e-12);
    }
}
