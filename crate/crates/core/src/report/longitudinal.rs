//! Twin estimates against naive observational estimates and causal bounds
//! over a growing horizon.

use serde::{Deserialize, Serialize};

use crate::bounds::{collect_observational, collect_twin};
use crate::error::{Error, Result};
use crate::hypothesis::{CompiledSpec, HypothesisSpec, OutcomeSpec, RegionPredicate};
use crate::testing::hoeffding_margin;
use crate::trajectory::TrajectoryDataset;
use crate::twin::TwinDataset;

/// Confidence level of every one-sided bound in a series.
pub const LONGITUDINAL_LEVEL: f64 = 0.95;

/// A family sharing `actions` and `region`, one spec per `t = 1..=T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalRequest {
    pub actions: Vec<usize>,
    /// `T + 1` steps; step `s` constrains `X_s`.
    pub region: RegionPredicate,
    pub feature: String,
    pub y_lo: f64,
    pub y_up: f64,
}

impl LongitudinalRequest {
    pub fn family(&self) -> Vec<HypothesisSpec> {
        (1..=self.actions.len())
            .map(|t| HypothesisSpec {
                id: format!("longitudinal-t{t}"),
                label: String::new(),
                t,
                actions: self.actions[..t].to_vec(),
                region: RegionPredicate {
                    steps: self.region.steps.iter().take(t + 1).cloned().collect(),
                },
                outcome: OutcomeSpec {
                    t,
                    feature: self.feature.clone(),
                    y_lo: self.y_lo,
                    y_up: self.y_up,
                },
            })
            .collect()
    }
}

/// One timestep of a series. Interval fields are one-sided bounds at
/// [`LONGITUDINAL_LEVEL`] each.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalPoint {
    pub t: usize,
    /// Set when no agreeing in-region trajectory or no in-region twin
    /// trajectory exists at `t`.
    pub absent: bool,
    pub n: usize,
    pub n_agree: usize,
    pub n_hat: usize,
    pub q_hat: Option<f64>,
    pub q_hat_lo: Option<f64>,
    pub q_hat_up: Option<f64>,
    /// Mean over agreeing in-region trajectories.
    pub naive: Option<f64>,
    pub naive_lo: Option<f64>,
    pub naive_up: Option<f64>,
    pub mu_lo: Option<f64>,
    pub mu_up: Option<f64>,
    /// Lower bound for `Q_lo`.
    pub q_lo_bound: Option<f64>,
    /// Upper bound for `Q_up`.
    pub q_up_bound: Option<f64>,
    /// Twin interval disjoint from `[q_lo_bound, q_up_bound]`.
    pub falsified: Option<bool>,
    /// Twin interval disjoint from the naive interval.
    pub naive_disagrees: Option<bool>,
}

fn margin(n: usize, range: f64) -> f64 {
    hoeffding_margin(n, range, 2.0 * (1.0 - LONGITUDINAL_LEVEL)).expect("n >= 1")
}

/// Requires every spec's actions to be a prefix of the twin data's tag.
pub fn longitudinal_comparison(
    obs: &TrajectoryDataset,
    twin: &TwinDataset,
    family: &[CompiledSpec],
) -> Result<Vec<LongitudinalPoint>> {
    family
        .iter()
        .map(|spec| {
            let t = spec.t();
            if t > twin.actions.len() || twin.actions[..t] != *spec.actions() {
                return Err(Error::ActionTagMismatch {
                    expected: spec.actions().to_vec(),
                    found: twin.actions.clone(),
                });
            }
            let o = collect_observational(obs, spec);
            let tw = collect_twin(&twin.prefix(t), spec)?;
            let s = o.summary();
            let ts = tw.summary();
            let r = spec.y_up() - spec.y_lo();
            let mut p = LongitudinalPoint {
                t,
                absent: s.n_agree == 0 || ts.n_hat == 0,
                n: s.n,
                n_agree: s.n_agree,
                n_hat: ts.n_hat,
                q_hat: ts.mu_hat,
                mu_lo: s.mu_lo,
                mu_up: s.mu_up,
                ..LongitudinalPoint::default()
            };
            if let Some(m) = ts.mu_hat {
                let d = margin(ts.n_hat, r);
                p.q_hat_lo = Some(m - d);
                p.q_hat_up = Some(m + d);
            }
            if s.n_agree > 0 {
                let m = o.agreeing.iter().sum::<f64>() / s.n_agree as f64;
                let d = margin(s.n_agree, r);
                p.naive = Some(m);
                p.naive_lo = Some(m - d);
                p.naive_up = Some(m + d);
            }
            if let (Some(lo), Some(up)) = (s.mu_lo, s.mu_up) {
                let d = margin(s.n, r);
                p.q_lo_bound = Some(lo - d);
                p.q_up_bound = Some(up + d);
            }
            if !p.absent {
                let (hl, hu) = (p.q_hat_lo.unwrap(), p.q_hat_up.unwrap());
                p.falsified = Some(hu < p.q_lo_bound.unwrap() || hl > p.q_up_bound.unwrap());
                p.naive_disagrees = Some(hu < p.naive_lo.unwrap() || hl > p.naive_up.unwrap());
            }
            Ok(p)
        })
        .collect()
}
