//! Sample versions of the longitudinal bounds.
//!
//! For an observed trajectory with actions `A_{1:t}` and a target `a_{1:t}`,
//! let `N` be the last step at which the two sequences agree. The trajectory
//! *qualifies* when its observed prefix `X_{0:N}` lies in `B_{0:N}`. Note the
//! prefix stops at `N`, not `t`: after the first disagreement the
//! counterfactual path is unobserved, so nothing beyond `N` can be checked.
//!
//! A qualifying trajectory contributes
//!
//! ```text
//! Y_lo = f(X_{0:t})  and  Y_up = f(X_{0:t})   if A_{1:t} = a_{1:t}
//! Y_lo = y_lo        and  Y_up = y_up         otherwise
//! ```
//!
//! Since `Y_up - Y_lo = (y_up - y_lo) 1(A_{1:t} != a_{1:t})`, the width of the
//! sample bounds relative to `y_up - y_lo` equals one minus the fraction of
//! qualifying trajectories that agree. [`BoundSummary`] is computed so that
//! identity holds to rounding error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::CompiledSpec;
use crate::trajectory::{ObservationalTrajectory, TrajectoryDataset};
use crate::twin::TwinDataset;

/// Largest `s` in `0..=t` with `taken[..s] == target[..s]`.
pub fn last_agreement_index(taken: &[usize], target: &[usize]) -> Result<usize> {
    if taken.len() != target.len() {
        return Err(Error::InvalidArgument(format!(
            "action sequences have lengths {} and {}",
            taken.len(),
            target.len()
        )));
    }
    Ok(taken.iter().zip(target).take_while(|(a, b)| a == b).count())
}

fn agreement(traj: &ObservationalTrajectory, target: &[usize]) -> usize {
    traj.steps
        .iter()
        .zip(target)
        .take_while(|(s, &a)| s.a == a)
        .count()
}

/// `(Y_lo, Y_up)` for a qualifying trajectory, `None` otherwise.
pub fn transformed_outcomes(traj: &ObservationalTrajectory, spec: &CompiledSpec) -> Option<(f64, f64)> {
    let t = spec.t();
    let n = agreement(traj, spec.actions());
    if !spec.in_region(traj, n) {
        return None;
    }
    if n == t {
        let y = spec.outcome(traj).clipped;
        Some((y, y))
    } else {
        Some((spec.y_lo(), spec.y_up()))
    }
}

/// Qualifying observational data for one spec.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationalSamples {
    /// Clipped outcomes of the qualifying trajectories with full agreement.
    pub agreeing: Vec<f64>,
    /// Raw outcomes of the same trajectories.
    pub agreeing_raw: Vec<f64>,
    /// Qualifying trajectories that deviate from `a_{1:t}` before `t`.
    pub disagreeing: usize,
    pub y_lo: f64,
    pub y_up: f64,
}

impl ObservationalSamples {
    pub fn n(&self) -> usize {
        self.agreeing.len() + self.disagreeing
    }

    /// Materialised `Y_lo` values (agreeing first).
    pub fn y_lo_values(&self) -> Vec<f64> {
        let mut v = self.agreeing.clone();
        v.extend(std::iter::repeat(self.y_lo).take(self.disagreeing));
        v
    }

    pub fn y_up_values(&self) -> Vec<f64> {
        let mut v = self.agreeing.clone();
        v.extend(std::iter::repeat(self.y_up).take(self.disagreeing));
        v
    }

    pub fn summary(&self) -> BoundSummary {
        let n = self.n();
        let (y_lo, y_up) = (self.y_lo, self.y_up);
        if n == 0 {
            return BoundSummary {
                n,
                n_agree: 0,
                mu_lo: None,
                mu_up: None,
                propensity_hat: None,
                tightness_hat: None,
                y_lo,
                y_up,
            };
        }
        let nf = n as f64;
        let m = self.disagreeing as f64;
        let s: f64 = self.agreeing.iter().sum();
        let mu_lo = (s + m * y_lo) / nf;
        let mu_up = (s + m * y_up) / nf;
        let propensity = self.agreeing.len() as f64 / nf;
        let tightness = if y_up > y_lo { (mu_up - mu_lo) / (y_up - y_lo) } else { 0.0 };
        // Cancellation in `mu_up - mu_lo` costs about `eps * max|y|` before
        // the division by the range.
        debug_assert!(
            y_up <= y_lo
                || (tightness - (1.0 - propensity)).abs()
                    <= 1e-12 * (y_up.abs().max(y_lo.abs()) / (y_up - y_lo)).max(1.0),
            "tightness identity violated: {tightness} vs {}",
            1.0 - propensity
        );
        BoundSummary {
            n,
            n_agree: self.agreeing.len(),
            mu_lo: Some(mu_lo),
            mu_up: Some(mu_up),
            propensity_hat: Some(propensity),
            tightness_hat: Some(tightness),
            y_lo,
            y_up,
        }
    }
}

/// Sample statistics behind the lower and upper bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    /// Qualifying trajectories.
    pub n: usize,
    /// Qualifying trajectories with full agreement.
    pub n_agree: usize,
    pub mu_lo: Option<f64>,
    pub mu_up: Option<f64>,
    pub propensity_hat: Option<f64>,
    /// `(mu_up - mu_lo) / (y_up - y_lo)`, or 0 when `y_up == y_lo`.
    pub tightness_hat: Option<f64>,
    pub y_lo: f64,
    pub y_up: f64,
}

impl BoundSummary {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

pub fn collect_observational(d: &TrajectoryDataset, spec: &CompiledSpec) -> ObservationalSamples {
    let mut out = ObservationalSamples {
        y_lo: spec.y_lo(),
        y_up: spec.y_up(),
        ..Default::default()
    };
    let t = spec.t();
    for traj in d.records() {
        let n = agreement(traj, spec.actions());
        if !spec.in_region(traj, n) {
            continue;
        }
        if n == t {
            let v = spec.outcome(traj);
            out.agreeing.push(v.clipped);
            out.agreeing_raw.push(v.raw);
        } else {
            out.disagreeing += 1;
        }
    }
    out
}

pub fn summarize_observational(d: &TrajectoryDataset, spec: &CompiledSpec) -> BoundSummary {
    collect_observational(d, spec).summary()
}

/// In-region twin outcomes for one spec.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TwinSamples {
    pub clipped: Vec<f64>,
    pub raw: Vec<f64>,
}

impl TwinSamples {
    pub fn summary(&self) -> TwinSummary {
        let n_hat = self.clipped.len();
        TwinSummary {
            n_hat,
            mu_hat: (n_hat > 0).then(|| self.clipped.iter().sum::<f64>() / n_hat as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinSummary {
    pub n_hat: usize,
    pub mu_hat: Option<f64>,
}

impl TwinSummary {
    pub fn is_empty(&self) -> bool {
        self.n_hat == 0
    }
}

/// Twin records must be tagged with exactly the spec's actions; they may be
/// longer than `t` only if their tag prefix matches.
pub fn collect_twin(d: &TwinDataset, spec: &CompiledSpec) -> Result<TwinSamples> {
    let t = spec.t();
    if d.actions.len() < t || d.actions[..t] != *spec.actions() {
        return Err(Error::ActionTagMismatch {
            expected: spec.actions().to_vec(),
            found: d.actions.clone(),
        });
    }
    let mut out = TwinSamples::default();
    for traj in &d.records {
        if spec.in_region(traj, t) {
            let v = spec.outcome(traj);
            out.clipped.push(v.clipped);
            out.raw.push(v.raw);
        }
    }
    Ok(out)
}

pub fn summarize_twin(d: &TwinDataset, spec: &CompiledSpec) -> Result<TwinSummary> {
    Ok(collect_twin(d, spec)?.summary())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{Constraint, HypothesisSpec, OutcomeSpec, RegionPredicate};
    use crate::trajectory::{Feature, FeatureSchema, Step};
    use crate::twin::TwinMeta;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            2,
            vec![Feature::continuous("z")],
            vec![Feature::continuous("y")],
            vec![3, 3],
        )
        .unwrap()
    }

    fn traj(a: &[usize], y: &[f64]) -> ObservationalTrajectory {
        ObservationalTrajectory {
            x0: vec![0.0],
            steps: a.iter().zip(y).map(|(&a, &y)| Step { a, x: vec![y] }).collect(),
        }
    }

    fn spec(t: usize, actions: Vec<usize>, region: RegionPredicate) -> CompiledSpec {
        HypothesisSpec {
            id: "s".into(),
            label: String::new(),
            t,
            actions,
            region,
            outcome: OutcomeSpec { t, feature: "y".into(), y_lo: 0.0, y_up: 1.0 },
        }
        .compile(&schema())
        .unwrap()
    }

    #[test]
    fn last_agreement() {
        assert_eq!(last_agreement_index(&[1, 2, 5], &[1, 2, 3]).unwrap(), 2);
        assert_eq!(last_agreement_index(&[4, 2, 3], &[1, 2, 3]).unwrap(), 0);
        assert_eq!(last_agreement_index(&[1, 2, 3], &[1, 2, 3]).unwrap(), 3);
        assert!(last_agreement_index(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn transformed_outcome_cases() {
        let below = RegionPredicate {
            steps: vec![
                vec![],
                vec![Constraint::Interval { feature: "y".into(), lo: None, hi: Some(0.5), closed_hi: false }],
                vec![],
            ],
        };
        let s = spec(2, vec![1, 1], below.clone());
        assert_eq!(transformed_outcomes(&traj(&[1, 1], &[0.2, 0.4]), &s), Some((0.4, 0.4)));
        assert_eq!(transformed_outcomes(&traj(&[1, 0], &[0.2, 0.9]), &s), Some((0.0, 1.0)));
        // N = 1 and X_1 outside B_1.
        assert_eq!(transformed_outcomes(&traj(&[1, 0], &[0.7, 0.9]), &s), None);
        // N = 0: X_1 is not checked.
        assert_eq!(transformed_outcomes(&traj(&[0, 1], &[0.7, 0.9]), &s), Some((0.0, 1.0)));
    }

    #[test]
    fn four_trajectory_summary() {
        let d = TrajectoryDataset::new(
            FeatureSchema::new(1, vec![Feature::continuous("z")], vec![Feature::continuous("y")], vec![2]).unwrap(),
            vec![
                traj(&[1], &[0.3]),
                traj(&[1], &[0.5]),
                traj(&[0], &[0.9]),
                traj(&[0], &[0.1]),
            ],
            "four",
        )
        .unwrap();
        let s = HypothesisSpec {
            id: "s".into(),
            label: String::new(),
            t: 1,
            actions: vec![1],
            region: RegionPredicate::whole_space(1),
            outcome: OutcomeSpec { t: 1, feature: "y".into(), y_lo: 0.0, y_up: 1.0 },
        }
        .compile(d.schema())
        .unwrap();
        let b = summarize_observational(&d, &s);
        assert_eq!(b.n, 4);
        assert!((b.mu_lo.unwrap() - 0.2).abs() < 1e-15);
        assert!((b.mu_up.unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(b.propensity_hat, Some(0.5));
        assert!((b.tightness_hat.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_agreement_and_empty() {
        let s = spec(1, vec![2], RegionPredicate::whole_space(1));
        let d = TrajectoryDataset::new(schema(), vec![traj(&[2, 0], &[0.2, 0.0]), traj(&[2, 1], &[0.6, 0.0])], "d").unwrap();
        let b = summarize_observational(&d, &s);
        assert_eq!(b.mu_lo, b.mu_up);
        assert!((b.mu_lo.unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(b.tightness_hat, Some(0.0));

        let empty = TrajectoryDataset::new(schema(), vec![], "e").unwrap();
        let b = summarize_observational(&empty, &s);
        assert!(b.is_empty() && b.mu_lo.is_none());
    }

    #[test]
    fn twin_summary_and_tag_guard() {
        let s = spec(1, vec![2], RegionPredicate::whole_space(1));
        let twin = TwinDataset::from_records(schema(), vec![2], vec![traj(&[2], &[0.2]), traj(&[2], &[0.4])], TwinMeta::default()).unwrap();
        let ts = summarize_twin(&twin, &s).unwrap();
        assert_eq!(ts.n_hat, 2);
        assert!((ts.mu_hat.unwrap() - 0.3).abs() < 1e-15);

        let other = TwinDataset::from_records(schema(), vec![1], vec![traj(&[1], &[0.2])], TwinMeta::default()).unwrap();
        assert!(matches!(summarize_twin(&other, &s), Err(Error::ActionTagMismatch { .. })));

        let none = TwinDataset::from_records(schema(), vec![2], vec![], TwinMeta::default()).unwrap();
        assert!(summarize_twin(&none, &s).unwrap().is_empty());
    }
}
