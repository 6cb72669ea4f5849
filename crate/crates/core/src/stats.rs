//! Streaming moments, batch-means standard errors and deterministic
//! pairwise reduction.

use serde::{Deserialize, Serialize};

/// Number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 100;

/// Divergence budget: fraction of diverged paths above which a summary is
/// flagged as failed.
pub const DIVERGENCE_BUDGET: f64 = 1e-4;

/// Count, mean and centered second moment (Welford / Chan merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Self {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// Reduces `items` by merging neighbours level by level; the tree shape
/// depends only on `items.len()`.
pub fn tree_reduce<T: Clone>(items: &[T], merge: impl Fn(&T, &T) -> T) -> Option<T> {
    if items.is_empty() {
        return None;
    }
    let mut level: Vec<T> = items.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => merge(a, b),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    level.pop()
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Half-open index range of batch `b` among `batches` over `len` items.
pub fn batch_range(len: usize, batches: usize, b: usize) -> std::ops::Range<usize> {
    let lo = (b as u128 * len as u128 / batches as u128) as usize;
    let hi = ((b as u128 + 1) * len as u128 / batches as u128) as usize;
    lo..hi
}

/// Batch count used for `len` samples.
pub fn batch_count(len: usize) -> usize {
    len.clamp(1, DEFAULT_BATCHES)
}

/// Monte Carlo mean with error bars and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub mean: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    /// Standard error from the plain per-sample variance.
    pub plain_stderr: f64,
    pub n_paths: u64,
    pub n_diverged: u64,
    pub n_batches: usize,
    pub master_seed: u64,
    /// Set when the diverged fraction exceeds [`DIVERGENCE_BUDGET`].
    pub failed: bool,
}

impl EstimatorSummary {
    /// Builds a summary from per-batch moments, merged in a fixed tree.
    pub fn from_batches(batches: &[Moments], n_diverged: u64, master_seed: u64) -> Self {
        let total = tree_reduce(batches, Moments::merge).unwrap_or_default();
        let n = total.count;
        let plain_stderr = if n >= 2 {
            (total.variance() / n as f64).sqrt()
        } else {
            0.0
        };
        let filled: Vec<f64> = batches
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| b.mean)
            .collect();
        let stderr = if filled.len() >= 2 {
            let k = filled.len() as f64;
            let m = pairwise_sum(&filled) / k;
            let dev: Vec<f64> = filled.iter().map(|x| (x - m) * (x - m)).collect();
            (pairwise_sum(&dev) / (k * (k - 1.0))).sqrt()
        } else {
            plain_stderr
        };
        let n_paths = n + n_diverged;
        let failed = n_paths == 0 || (n_diverged as f64) > DIVERGENCE_BUDGET * n_paths as f64;
        Self {
            mean: total.mean,
            stderr,
            plain_stderr,
            n_paths,
            n_diverged,
            n_batches: filled.len(),
            master_seed,
            failed,
        }
    }

    /// Summary of raw samples split into contiguous batches.
    pub fn from_samples(samples: &[f64], n_diverged: u64, master_seed: u64) -> Self {
        let batches = batch_count(samples.len());
        let moments: Vec<Moments> = (0..batches)
            .map(|b| {
                let mut m = Moments::default();
                for &x in &samples[batch_range(samples.len(), batches, b)] {
                    m.push(x);
                }
                m
            })
            .collect();
        Self::from_batches(&moments, n_diverged, master_seed)
    }

    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}
