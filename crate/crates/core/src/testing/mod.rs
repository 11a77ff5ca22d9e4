//! From summaries to decisions.
//!
//! Each spec yields two one-sided hypotheses about the twin mean `Q̂`:
//!
//! * lower: `Q̂ >= Q_lo`, rejected at `α` when an upper confidence bound for
//!   `Q̂` falls below a lower confidence bound for `Q_lo`;
//! * upper: `Q̂ <= Q_up`, rejected when a lower bound for `Q̂` exceeds an
//!   upper bound for `Q_up`.
//!
//! Each confidence bound holds with probability `1 - α/2`, so a union bound
//! gives level `α`. Nothing is rejected unless both the observational data
//! and the twin data contain the conditioning event.

mod bootstrap;
mod hoeffding;
mod holm;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_bound, BootstrapDistribution, BootstrapVariant, Side};
pub use hoeffding::{hoeffding_margin, p_value_hoeffding_lo, p_value_hoeffding_up};
pub use holm::{holm_bonferroni, MultiplicityResult};

use crate::bounds::{collect_observational, collect_twin, BoundSummary, ObservationalSamples, TwinSamples, TwinSummary};
use crate::error::Result;
use crate::hypothesis::CompiledSpec;
use crate::seed::{derive_seed, stable_hash};
use crate::trajectory::TrajectoryDataset;
use crate::twin::TwinDataset;

/// Ascending significance levels searched for grid p-values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid(pub Vec<f64>);

impl AlphaGrid {
    /// `points` levels evenly spaced in log scale over `[lo, hi]`.
    pub fn log_spaced(points: usize, lo: f64, hi: f64) -> Self {
        assert!(points >= 2 && lo > 0.0 && hi > lo);
        let (a, b) = (lo.ln(), hi.ln());
        let mut v: Vec<f64> = (0..points)
            .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
            .collect();
        v[0] = lo;
        v[points - 1] = hi;
        AlphaGrid(v)
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    /// Smallest level at which `reject` holds, or 1.
    pub fn p_value(&self, mut reject: impl FnMut(f64) -> bool) -> f64 {
        self.0.iter().copied().find(|&a| reject(a)).unwrap_or(1.0)
    }
}

impl Default for AlphaGrid {
    /// 120 points from `1e-6` to 1.
    fn default() -> Self {
        AlphaGrid::log_spaced(120, 1e-6, 1.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Hoeffding,
    Bootstrap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestConfig {
    pub method: Method,
    /// Level at which the reported confidence bounds are evaluated.
    pub alpha: f64,
    pub bootstrap_samples: usize,
    /// Bootstrap tests need at least this many observational and twin samples.
    pub min_bootstrap_n: usize,
    pub variant: BootstrapVariant,
    pub seed: u64,
    #[serde(skip, default)]
    pub grid: AlphaGrid,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            method: Method::Hoeffding,
            alpha: 0.05,
            bootstrap_samples: 100,
            min_bootstrap_n: 100,
            variant: BootstrapVariant::ReversePercentile,
            seed: 0,
            grid: AlphaGrid::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    /// No agreeing in-region observational trajectory, or no in-region twin trajectory.
    Antecedent,
    /// `y_lo == y_up`.
    Uninformative,
    /// Fewer samples than the bootstrap minimum.
    InsufficientBootstrapData,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum TestStatus {
    Tested,
    Skipped(SkipReason),
}

/// Confidence bounds at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionBounds {
    pub alpha: f64,
    /// Lower bound for `Q_lo`.
    pub q_lo: f64,
    /// Upper bound for `Q_up`.
    pub q_up: f64,
    /// Lower and upper bounds for `Q̂`.
    pub q_hat_lo: f64,
    pub q_hat_up: f64,
    pub reject_lo: bool,
    pub reject_up: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub spec_id: String,
    pub label: String,
    pub quantity: String,
    pub t: usize,
    pub actions: Vec<usize>,
    pub method: Method,
    #[serde(flatten)]
    pub status: TestStatus,
    pub antecedent_ok: bool,
    pub n: usize,
    pub n_agree: usize,
    pub n_hat: usize,
    pub observational: BoundSummary,
    pub twin: TwinSummary,
    pub p_lo: f64,
    pub p_up: f64,
    pub bounds: Option<DecisionBounds>,
}

impl TestOutcome {
    pub fn is_tested(&self) -> bool {
        self.status == TestStatus::Tested
    }
}

/// Computes the bounds of one method at arbitrary levels.
enum Bounder {
    Hoeffding {
        mu_lo: f64,
        mu_up: f64,
        mu_hat: f64,
        n: usize,
        n_hat: usize,
        range: f64,
    },
    Bootstrap {
        obs_lo: BootstrapDistribution,
        obs_up: BootstrapDistribution,
        twin: BootstrapDistribution,
        variant: BootstrapVariant,
    },
}

impl Bounder {
    fn at(&self, alpha: f64) -> DecisionBounds {
        let (q_lo, q_up, q_hat_lo, q_hat_up) = match self {
            Bounder::Hoeffding { mu_lo, mu_up, mu_hat, n, n_hat, range } => {
                let d = hoeffding_margin(*n, *range, alpha).expect("validated inputs");
                let dh = hoeffding_margin(*n_hat, *range, alpha).expect("validated inputs");
                (mu_lo - d, mu_up + d, mu_hat - dh, mu_hat + dh)
            }
            Bounder::Bootstrap { obs_lo, obs_up, twin, variant } => (
                obs_lo.bound(alpha, Side::Lower, *variant),
                obs_up.bound(alpha, Side::Upper, *variant),
                twin.bound(alpha, Side::Lower, *variant),
                twin.bound(alpha, Side::Upper, *variant),
            ),
        };
        DecisionBounds {
            alpha,
            q_lo,
            q_up,
            q_hat_lo,
            q_hat_up,
            reject_lo: q_hat_up < q_lo,
            reject_up: q_hat_lo > q_up,
        }
    }
}

/// Tests one spec against full datasets. Errors only when the twin data are
/// tagged with other actions than the spec.
pub fn test_hypothesis(obs: &TrajectoryDataset, twin: &TwinDataset, spec: &CompiledSpec, cfg: &TestConfig) -> Result<TestOutcome> {
    let o = collect_observational(obs, spec);
    let t = collect_twin(twin, spec)?;
    Ok(test_samples(&o, &t, spec, cfg))
}

/// Tests one spec from pre-collected samples.
pub fn test_samples(obs: &ObservationalSamples, twin: &TwinSamples, spec: &CompiledSpec, cfg: &TestConfig) -> TestOutcome {
    let observational = obs.summary();
    let twin_summary = twin.summary();
    let antecedent_ok = observational.n_agree > 0 && twin_summary.n_hat > 0;
    let mut out = TestOutcome {
        spec_id: spec.spec.id.clone(),
        label: spec.spec.label.clone(),
        quantity: spec.spec.quantity().to_string(),
        t: spec.t(),
        actions: spec.actions().to_vec(),
        method: cfg.method,
        status: TestStatus::Tested,
        antecedent_ok,
        n: observational.n,
        n_agree: observational.n_agree,
        n_hat: twin_summary.n_hat,
        observational,
        twin: twin_summary,
        p_lo: 1.0,
        p_up: 1.0,
        bounds: None,
    };
    let skip = if !antecedent_ok {
        Some(SkipReason::Antecedent)
    } else if spec.spec.is_degenerate() {
        Some(SkipReason::Uninformative)
    } else if cfg.method == Method::Bootstrap && (out.n < cfg.min_bootstrap_n || out.n_hat < cfg.min_bootstrap_n) {
        Some(SkipReason::InsufficientBootstrapData)
    } else {
        None
    };
    if let Some(reason) = skip {
        out.status = TestStatus::Skipped(reason);
        return out;
    }

    let bounder = match cfg.method {
        Method::Hoeffding => Bounder::Hoeffding {
            mu_lo: out.observational.mu_lo.expect("n > 0"),
            mu_up: out.observational.mu_up.expect("n > 0"),
            mu_hat: out.twin.mu_hat.expect("n_hat > 0"),
            n: out.n,
            n_hat: out.n_hat,
            range: spec.spec.outcome.range(),
        },
        Method::Bootstrap => {
            let base = derive_seed(cfg.seed, stable_hash(&spec.spec.id));
            let b = cfg.bootstrap_samples;
            Bounder::Bootstrap {
                obs_lo: BootstrapDistribution::new(&obs.y_lo_values(), b, derive_seed(base, 0)).expect("n > 0"),
                obs_up: BootstrapDistribution::new(&obs.y_up_values(), b, derive_seed(base, 1)).expect("n > 0"),
                twin: BootstrapDistribution::new(&twin.clipped, b, derive_seed(base, 2)).expect("n_hat > 0"),
                variant: cfg.variant,
            }
        }
    };
    match (&bounder, cfg.method) {
        (Bounder::Hoeffding { mu_lo, mu_up, mu_hat, n, n_hat, range }, Method::Hoeffding) => {
            out.p_lo = p_value_hoeffding_lo(*mu_lo, *n, *mu_hat, *n_hat, *range);
            out.p_up = p_value_hoeffding_up(*mu_up, *n, *mu_hat, *n_hat, *range);
        }
        _ => {
            out.p_lo = cfg.grid.p_value(|a| bounder.at(a).reject_lo);
            out.p_up = cfg.grid.p_value(|a| bounder.at(a).reject_up);
        }
    }
    out.bounds = Some(bounder.at(cfg.alpha));
    out
}

/// Grid p-values of the Hoeffding rule, evaluated literally. Used to check
/// the closed form.
pub fn hoeffding_grid_p_values(obs: &BoundSummary, twin: &TwinSummary, grid: &AlphaGrid) -> Option<(f64, f64)> {
    let b = Bounder::Hoeffding {
        mu_lo: obs.mu_lo?,
        mu_up: obs.mu_up?,
        mu_hat: twin.mu_hat?,
        n: obs.n,
        n_hat: twin.n_hat,
        range: obs.y_up - obs.y_lo,
    };
    Some((grid.p_value(|a| b.at(a).reject_lo), grid.p_value(|a| b.at(a).reject_up)))
}

/// Confidence bounds of the Hoeffding rule at one level.
pub fn hoeffding_decision(obs: &BoundSummary, twin: &TwinSummary, alpha: f64) -> Option<DecisionBounds> {
    Some(
        Bounder::Hoeffding {
            mu_lo: obs.mu_lo?,
            mu_up: obs.mu_up?,
            mu_hat: twin.mu_hat?,
            n: obs.n,
            n_hat: twin.n_hat,
            range: obs.y_up - obs.y_lo,
        }
        .at(alpha),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{HypothesisSpec, OutcomeSpec, RegionPredicate};
    use crate::trajectory::{Feature, FeatureSchema};

    fn spec(y_lo: f64, y_up: f64) -> CompiledSpec {
        let schema = FeatureSchema::new(1, vec![], vec![Feature::continuous("y")], vec![2]).unwrap();
        HypothesisSpec {
            id: "h".into(),
            label: String::new(),
            t: 1,
            actions: vec![1],
            region: RegionPredicate::whole_space(1),
            outcome: OutcomeSpec { t: 1, feature: "y".into(), y_lo, y_up },
        }
        .compile(&schema)
        .unwrap()
    }

    fn obs(agree: Vec<f64>, disagree: usize) -> ObservationalSamples {
        ObservationalSamples { agreeing_raw: agree.clone(), agreeing: agree, disagreeing: disagree, y_lo: 0.0, y_up: 1.0 }
    }

    #[test]
    fn grid_shape() {
        let g = AlphaGrid::default();
        assert_eq!(g.levels().len(), 120);
        assert_eq!(g.levels()[0], 1e-6);
        assert_eq!(*g.levels().last().unwrap(), 1.0);
        assert!(g.levels().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn antecedent_failures_skip() {
        let s = spec(0.0, 1.0);
        let no_agree = test_samples(&obs(vec![], 10), &TwinSamples { clipped: vec![0.5], raw: vec![0.5] }, &s, &TestConfig::default());
        assert_eq!(no_agree.status, TestStatus::Skipped(SkipReason::Antecedent));
        assert_eq!((no_agree.p_lo, no_agree.p_up), (1.0, 1.0));
        let no_twin = test_samples(&obs(vec![0.2], 1), &TwinSamples::default(), &s, &TestConfig::default());
        assert_eq!(no_twin.status, TestStatus::Skipped(SkipReason::Antecedent));
        assert!(!no_twin.antecedent_ok);
    }

    #[test]
    fn degenerate_and_small_bootstrap_skip() {
        let twin = TwinSamples { clipped: vec![0.5; 5], raw: vec![0.5; 5] };
        let mut o = obs(vec![0.5; 5], 0);
        o.y_lo = 0.5;
        o.y_up = 0.5;
        let d = test_samples(&o, &twin, &spec(0.5, 0.5), &TestConfig::default());
        assert_eq!(d.status, TestStatus::Skipped(SkipReason::Uninformative));
        let cfg = TestConfig { method: Method::Bootstrap, ..TestConfig::default() };
        let b = test_samples(&obs(vec![0.5; 5], 3), &twin, &spec(0.0, 1.0), &cfg);
        assert_eq!(b.status, TestStatus::Skipped(SkipReason::InsufficientBootstrapData));
        assert_eq!(b.p_lo, 1.0);
    }

    #[test]
    fn clear_violation_is_rejected() {
        let s = spec(0.0, 1.0);
        let o = obs(vec![1.0; 900], 100);
        let twin = TwinSamples { clipped: vec![0.0; 1000], raw: vec![0.0; 1000] };
        for method in [Method::Hoeffding, Method::Bootstrap] {
            let cfg = TestConfig { method, ..TestConfig::default() };
            let r = test_samples(&o, &twin, &s, &cfg);
            assert!(r.is_tested());
            assert!(r.p_lo < 1e-5, "{method:?} {}", r.p_lo);
            assert_eq!(r.p_up, 1.0);
            let b = r.bounds.unwrap();
            assert!(b.reject_lo && !b.reject_up);
        }
    }

    #[test]
    fn serialized_status_shape() {
        let s = spec(0.0, 1.0);
        let r = test_samples(&obs(vec![], 1), &TwinSamples::default(), &s, &TestConfig::default());
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["status"], "skipped");
        assert_eq!(v["reason"], "antecedent");
    }
}
