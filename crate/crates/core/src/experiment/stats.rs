//! Mergeable mean/variance accumulators.

use serde::{Deserialize, Serialize};

/// Running mean and sum of squared deviations (Welford, merged pairwise with Chan's rule).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        RunningStats { n, mean, m2 }
    }

    /// Sample variance, zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean: sample standard deviation over `√n`.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

/// Element-wise [`RunningStats`] over fixed-length vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VectorStats(pub Vec<RunningStats>);

impl VectorStats {
    pub fn new(len: usize) -> Self {
        VectorStats(vec![RunningStats::default(); len])
    }

    pub fn push(&mut self, xs: &[f64]) {
        if self.0.is_empty() {
            self.0 = vec![RunningStats::default(); xs.len()];
        }
        assert_eq!(xs.len(), self.0.len(), "vector length changed between samples");
        self.0.iter_mut().zip(xs).for_each(|(s, &x)| s.push(x));
    }

    pub fn merge(&self, other: &VectorStats) -> VectorStats {
        if self.0.is_empty() {
            return other.clone();
        }
        if other.0.is_empty() {
            return self.clone();
        }
        VectorStats(self.0.iter().zip(&other.0).map(|(a, b)| a.merge(b)).collect())
    }

    pub fn means(&self) -> Vec<f64> {
        self.0.iter().map(|s| s.mean).collect()
    }

    pub fn stderrs(&self) -> Vec<f64> {
        self.0.iter().map(RunningStats::stderr).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_sample() {
        let s: RunningStats = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0].into_iter().collect();
        assert_eq!(s.mean, 5.0);
        assert!((s.variance() - 32.0 / 7.0).abs() < 1e-12);
        assert!((s.stderr() - (32.0f64 / 7.0 / 8.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_counts() {
        assert_eq!(RunningStats::default().stderr(), 0.0);
        let one: RunningStats = [3.0].into_iter().collect();
        assert_eq!((one.mean, one.stderr()), (3.0, 0.0));
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(xs in prop::collection::vec(-10.0f64..10.0, 0..40), split in 0usize..40) {
            let k = split.min(xs.len());
            let all: RunningStats = xs.iter().copied().collect();
            let a: RunningStats = xs[..k].iter().copied().collect();
            let b: RunningStats = xs[k..].iter().copied().collect();
            let ab = a.merge(&b);
            let ba = b.merge(&a);
            prop_assert_eq!(ab.n, all.n);
            prop_assert!((ab.mean - all.mean).abs() < 1e-12);
            prop_assert!((ab.m2 - all.m2).abs() < 1e-12 * (1.0 + all.m2));
            prop_assert!((ab.mean - ba.mean).abs() < 1e-12 && (ab.m2 - ba.m2).abs() < 1e-12 * (1.0 + all.m2));
        }

        #[test]
        fn merge_is_associative(xs in prop::collection::vec(-10.0f64..10.0, 3..30)) {
            let n = xs.len();
            let parts: Vec<RunningStats> = [&xs[..n / 3], &xs[n / 3..2 * n / 3], &xs[2 * n / 3..]]
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect();
            let left = parts[0].merge(&parts[1]).merge(&parts[2]);
            let right = parts[0].merge(&parts[1].merge(&parts[2]));
            prop_assert!((left.mean - right.mean).abs() < 1e-12);
            prop_assert!((left.m2 - right.m2).abs() < 1e-12 * (1.0 + left.m2));
        }
    }
}
