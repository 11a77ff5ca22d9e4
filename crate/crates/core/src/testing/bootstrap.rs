//! Bootstrap confidence bounds for a mean.
//!
//! The reverse-percentile lower bound at level `1 - α/2` is
//! `2 m - q(1 - α/2)` and the upper bound `2 m - q(α/2)`, where `m` is the
//! sample mean and `q` the quantile function of the resampled means. One
//! resample set serves every `α`, which makes the bounds nested in `α`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::quantile_sorted;
use crate::seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapVariant {
    #[default]
    ReversePercentile,
    Percentile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// Sorted means of `B` resamples drawn with replacement.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapDistribution {
    mean: f64,
    resampled: Vec<f64>,
}

impl BootstrapDistribution {
    pub fn new(samples: &[f64], resamples: usize, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("bootstrap needs at least one sample".into()));
        }
        if resamples == 0 {
            return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
        }
        let n = samples.len();
        let mut rng = seed::rng(seed);
        let mut resampled: Vec<f64> = (0..resamples)
            .map(|_| (0..n).map(|_| samples[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
            .collect();
        resampled.sort_by(f64::total_cmp);
        Ok(BootstrapDistribution {
            mean: samples.iter().sum::<f64>() / n as f64,
            resampled,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn resampled_means(&self) -> &[f64] {
        &self.resampled
    }

    fn q(&self, level: f64) -> f64 {
        quantile_sorted(&self.resampled, level).expect("nonempty")
    }

    /// One-sided bound at level `1 - α/2`.
    pub fn bound(&self, alpha: f64, side: Side, variant: BootstrapVariant) -> f64 {
        let (hi, lo) = (1.0 - alpha / 2.0, alpha / 2.0);
        match (side, variant) {
            (Side::Lower, BootstrapVariant::ReversePercentile) => 2.0 * self.mean - self.q(hi),
            (Side::Upper, BootstrapVariant::ReversePercentile) => 2.0 * self.mean - self.q(lo),
            (Side::Lower, BootstrapVariant::Percentile) => self.q(lo),
            (Side::Upper, BootstrapVariant::Percentile) => self.q(hi),
        }
    }
}

/// Reverse-percentile bound from a fresh resample set.
pub fn bootstrap_bound(samples: &[f64], alpha: f64, side: Side, resamples: usize, seed: u64) -> Result<f64> {
    Ok(BootstrapDistribution::new(samples, resamples, seed)?.bound(alpha, side, BootstrapVariant::ReversePercentile))
}
