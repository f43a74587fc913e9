//! Monte Carlo budgets and mean/standard-error summaries.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, BLOCK};

/// Evaluates `path` for `m` replicates. Replicates are grouped in blocks of
/// [`BLOCK`], each with its own stream `derive_seed(seed, [block])`; the
/// output is independent of the thread count.
pub fn par_paths<T, F>(m: usize, seed: u64, path: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let nblocks = m.div_ceil(BLOCK);
    let chunks: Vec<Vec<T>> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(m - b * BLOCK);
            let mut rng = stream(derive_seed(seed, &[b as u64]));
            (0..len).map(|_| path(&mut rng)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Replicate count and master seed for one Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self { paths, seed }
    }

    pub(crate) fn require_at_least(&self, min: usize) -> Result<()> {
        if self.paths < min {
            Err(Error::OutOfRange(format!(
                "at least {min} Monte Carlo paths required, got {}",
                self.paths
            )))
        } else {
            Ok(())
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermEstimate {
    pub value: f64,
    pub stderr: f64,
    #[serde(rename = "M")]
    pub replicates: usize,
}

impl TermEstimate {
    pub fn exact(value: f64, replicates: usize) -> Self {
        Self {
            value,
            stderr: 0.0,
            replicates,
        }
    }

    /// Sample mean and standard error of iid observations. Summation is
    /// sequential so results do not depend on thread scheduling.
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len();
        if m == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = if m > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64
        } else {
            0.0
        };
        Self {
            value: mean,
            stderr: (var / m as f64).sqrt(),
            replicates: m,
        }
    }

    /// Mean with a batch-means standard error over `groups` contiguous groups.
    pub fn batch_means(xs: &[f64], groups: usize) -> Self {
        let m = xs.len();
        let g = groups.clamp(2, m.max(2));
        if m < 2 * g {
            return Self::from_samples(xs);
        }
        let means: Vec<f64> = (0..g)
            .map(|k| {
                let lo = k * m / g;
                let hi = (k + 1) * m / g;
                xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect();
        let mut t = Self::from_samples(&means);
        t.value = xs.iter().sum::<f64>() / m as f64;
        t.replicates = m;
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_summary() {
        let t = TermEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.value, 2.5);
        assert!((t.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
