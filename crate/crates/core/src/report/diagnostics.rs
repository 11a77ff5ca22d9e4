use serde::{Deserialize, Serialize};

use crate::quantile::quantile;
use crate::testing::{DecisionBounds, TestOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramConfig {
    pub bins: usize,
    /// Restrict the axis to the 0.025 and 0.975 quantiles of the
    /// observational values.
    pub truncate: bool,
    pub max_specs: usize,
    /// Also draw histograms for specs that were not rejected.
    pub include_unrejected: bool,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig {
            bins: 20,
            truncate: true,
            max_specs: 20,
            include_unrejected: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub observational: usize,
    pub twin: usize,
}

/// Raw outcome values of agreeing observational trajectories against raw
/// twin outcomes, with the decision bounds as error bars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub spec_id: String,
    pub quantity: String,
    pub truncated: bool,
    pub range: (f64, f64),
    pub bins: Vec<HistogramBin>,
    pub observational_n: usize,
    pub twin_n: usize,
    /// Values outside `range`, not counted in any bin.
    pub observational_outside: usize,
    pub twin_outside: usize,
    pub observational_mean: Option<f64>,
    pub twin_mean: Option<f64>,
    pub bounds: Option<DecisionBounds>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn histogram(outcome: &TestOutcome, observational: &[f64], twin: &[f64], cfg: &HistogramConfig) -> Histogram {
    let reference = if observational.is_empty() { twin } else { observational };
    let (lo, hi) = if reference.is_empty() {
        (0.0, 0.0)
    } else if cfg.truncate {
        (quantile(reference, 0.025).unwrap(), quantile(reference, 0.975).unwrap())
    } else {
        let all = observational.iter().chain(twin);
        (
            all.clone().copied().fold(f64::INFINITY, f64::min),
            all.copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let k = if hi > lo { cfg.bins.max(1) } else { 1 };
    let width = (hi - lo) / k as f64;
    let mut bins: Vec<HistogramBin> = (0..k)
        .map(|i| HistogramBin {
            lo: lo + width * i as f64,
            hi: if i + 1 == k { hi } else { lo + width * (i + 1) as f64 },
            observational: 0,
            twin: 0,
        })
        .collect();
    let slot = |v: f64| -> Option<usize> {
        if !(lo..=hi).contains(&v) {
            None
        } else if width > 0.0 {
            Some((((v - lo) / width) as usize).min(k - 1))
        } else {
            Some(0)
        }
    };
    let mut outside = [0usize; 2];
    for (which, values) in [observational, twin].into_iter().enumerate() {
        for &v in values {
            match slot(v) {
                Some(i) if which == 0 => bins[i].observational += 1,
                Some(i) => bins[i].twin += 1,
                None => outside[which] += 1,
            }
        }
    }
    if reference.is_empty() {
        bins.clear();
    }
    Histogram {
        spec_id: outcome.spec_id.clone(),
        quantity: outcome.quantity.clone(),
        truncated: cfg.truncate,
        range: (lo, hi),
        bins,
        observational_n: observational.len(),
        twin_n: twin.len(),
        observational_outside: outside[0],
        twin_outside: outside[1],
        observational_mean: mean(observational),
        twin_mean: mean(twin),
        bounds: outcome.bounds.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{BoundSummary, TwinSummary};
    use crate::testing::{Method, TestStatus};

    fn outcome() -> TestOutcome {
        TestOutcome {
            spec_id: "s".into(),
            label: String::new(),
            quantity: "q".into(),
            t: 1,
            actions: vec![0],
            method: Method::Hoeffding,
            status: TestStatus::Tested,
            antecedent_ok: true,
            n: 0,
            n_agree: 0,
            n_hat: 0,
            observational: BoundSummary {
                n: 0,
                n_agree: 0,
                mu_lo: None,
                mu_up: None,
                propensity_hat: None,
                tightness_hat: None,
                y_lo: 0.0,
                y_up: 1.0,
            },
            twin: TwinSummary { n_hat: 0, mu_hat: None },
            p_lo: 1.0,
            p_up: 1.0,
            bounds: None,
        }
    }

    #[test]
    fn truncation_drops_tails() {
        let obs: Vec<f64> = (0..=200).map(|i| i as f64 / 2.0).collect();
        let twin = vec![-5.0, 50.0, 500.0];
        let h = histogram(&outcome(), &obs, &twin, &HistogramConfig::default());
        assert_eq!(h.range, (2.5, 97.5));
        assert_eq!(h.bins.len(), 20);
        let counted: usize = h.bins.iter().map(|b| b.observational).sum();
        assert_eq!(counted + h.observational_outside, obs.len());
        assert_eq!(h.twin_outside, 2);
        assert_eq!(h.bins.iter().map(|b| b.twin).sum::<usize>(), 1);
    }

    #[test]
    fn untruncated_covers_everything() {
        let cfg = HistogramConfig { truncate: false, ..HistogramConfig::default() };
        let h = histogram(&outcome(), &[1.0, 2.0, 3.0], &[0.0, 10.0], &cfg);
        assert_eq!(h.range, (0.0, 10.0));
        assert_eq!(h.observational_outside + h.twin_outside, 0);
        assert_eq!(h.bins.last().unwrap().twin, 1);
    }

    #[test]
    fn constant_and_empty_inputs() {
        let h = histogram(&outcome(), &[4.0; 10], &[4.0, 5.0], &HistogramConfig::default());
        assert_eq!(h.bins.len(), 1);
        assert_eq!((h.bins[0].observational, h.bins[0].twin, h.twin_outside), (10, 1, 1));
        let e = histogram(&outcome(), &[], &[], &HistogramConfig::default());
        assert!(e.bins.is_empty() && e.observational_mean.is_none());
    }
}
