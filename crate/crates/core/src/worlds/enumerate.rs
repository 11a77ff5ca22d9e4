//! Exact observational and interventional laws by exhaustive enumeration.

use std::collections::BTreeMap;

use serde::Serialize;

use super::DiscreteWorld;
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisSpec;

/// Probability of each flat path `[x0, a1, x1, ..., a_k, x_k]`.
pub type Law = BTreeMap<Vec<usize>, f64>;

/// Joint law of `(X0, A1, X1, ..., AT, XT)` with the confounder summed out.
pub fn observational_law(w: &DiscreteWorld) -> Law {
    let mut law = Law::new();
    let mut path = Vec::with_capacity(2 * w.horizon + 1);
    for (u, &pu) in w.confounder.iter().enumerate() {
        for (x0, &px) in w.x0_table[u].iter().enumerate() {
            if pu * px == 0.0 {
                continue;
            }
            path.clear();
            path.push(x0);
            walk_observational(w, u, pu * px, &mut path, &mut law);
        }
    }
    law
}

fn walk_observational(w: &DiscreteWorld, u: usize, p: f64, path: &mut Vec<usize>, law: &mut Law) {
    if path.len() == 2 * w.horizon + 1 {
        *law.entry(path.clone()).or_insert(0.0) += p;
        return;
    }
    let policy: Vec<f64> = w.policy_row(u, path).to_vec();
    for (a, &pa) in policy.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        path.push(a);
        let dynamics: Vec<f64> = w.dynamics_row(u, path).to_vec();
        for (x, &px) in dynamics.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            path.push(x);
            walk_observational(w, u, p * pa * px, path, law);
            path.pop();
        }
        path.pop();
    }
}

/// Law of `(X0, X1(a_1), ..., X_t(a_{1:t}))`, keyed by the flat path with the
/// target actions filled in.
pub fn interventional_law(w: &DiscreteWorld, actions: &[usize]) -> Result<Law> {
    if actions.is_empty() || actions.len() > w.horizon {
        return Err(Error::InvalidArgument(format!(
            "intervention of length {} on a world with horizon {}",
            actions.len(),
            w.horizon
        )));
    }
    for (s, &a) in actions.iter().enumerate() {
        if a >= w.action_cardinalities[s] {
            return Err(Error::InvalidArgument(format!("action {a} out of range at step {}", s + 1)));
        }
    }
    let mut law = Law::new();
    let mut path = Vec::with_capacity(2 * actions.len() + 1);
    for (u, &pu) in w.confounder.iter().enumerate() {
        for (x0, &px) in w.x0_table[u].iter().enumerate() {
            if pu * px == 0.0 {
                continue;
            }
            path.clear();
            path.push(x0);
            walk_interventional(w, u, actions, pu * px, false, &mut path, &mut law);
        }
    }
    Ok(law)
}

/// Step `s` is pinned while the intervention still follows the override's
/// action sequence; a unit's agent is consulted only on pinned steps.
fn walk_interventional(
    w: &DiscreteWorld,
    u: usize,
    actions: &[usize],
    p: f64,
    deviated: bool,
    path: &mut Vec<usize>,
    law: &mut Law,
) {
    let s = path.len() / 2 + 1;
    if s > actions.len() {
        *law.entry(path.clone()).or_insert(0.0) += p;
        return;
    }
    let a = actions[s - 1];
    let pinned = w.override_.as_ref().filter(|o| {
        s <= o.actions.len() && o.actions[..s] == actions[..s]
    });
    let p_agree = match pinned {
        Some(_) if !deviated => w.policy_row(u, path)[a],
        Some(_) => 0.0,
        None => 1.0,
    };
    path.push(a);
    if p_agree > 0.0 {
        let dynamics: Vec<f64> = w.dynamics_row(u, path).to_vec();
        for (x, &px) in dynamics.iter().enumerate() {
            if px > 0.0 {
                path.push(x);
                walk_interventional(w, u, actions, p * p_agree * px, deviated, path, law);
                path.pop();
            }
        }
    }
    if let Some(o) = pinned {
        if p_agree < 1.0 {
            path.push(o.fixed[s - 1]);
            walk_interventional(w, u, actions, p * (1.0 - p_agree), true, path, law);
            path.pop();
        }
    }
    path.pop();
}

/// Exact target and bounds for one spec.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleBounds {
    /// `E[f(X_{0:t}(a)) | X_{0:t}(a) in B_{0:t}]`.
    pub q: f64,
    pub q_lo: f64,
    pub q_up: f64,
    /// `P(X_{0:t}(a) in B_{0:t})`.
    pub p_event: f64,
    /// Probability that an observed trajectory qualifies.
    pub p_qualify: f64,
    /// `P(A_{1:t} = a_{1:t} | qualifies)`.
    pub propensity: f64,
    /// Observational mean of `f` given full agreement and `X_{0:t}` in `B_{0:t}`.
    pub naive: Option<f64>,
}

/// Ground truth for `spec` on `w`, computed without the sample-level code.
pub fn exact_bounds_oracle(w: &DiscreteWorld, spec: &HypothesisSpec) -> Result<OracleBounds> {
    let c = spec.compile(&w.schema)?;
    let t = spec.t;
    let (y_lo, y_up) = (spec.outcome.y_lo, spec.outcome.y_up);

    let (mut p_event, mut q_mass) = (0.0, 0.0);
    for (path, p) in interventional_law(w, &spec.actions)? {
        let traj = w.trajectory(&path);
        if c.in_region(&traj, t) {
            p_event += p;
            q_mass += p * c.outcome(&traj).clipped;
        }
    }
    if p_event <= 0.0 {
        return Err(Error::ZeroProbabilityEvent);
    }

    let (mut p_qualify, mut lo_mass, mut up_mass, mut p_agree) = (0.0, 0.0, 0.0, 0.0);
    let (mut p_naive, mut naive_mass) = (0.0, 0.0);
    for (path, p) in observational_law(w) {
        let traj = w.trajectory(&path[..2 * t + 1]);
        let mut n = 0;
        while n < t && path[2 * n + 1] == spec.actions[n] {
            n += 1;
        }
        if !c.in_region(&traj, n) {
            continue;
        }
        p_qualify += p;
        if n == t {
            let y = c.outcome(&traj).clipped;
            lo_mass += p * y;
            up_mass += p * y;
            p_agree += p;
            if c.in_region(&traj, t) {
                p_naive += p;
                naive_mass += p * y;
            }
        } else {
            lo_mass += p * y_lo;
            up_mass += p * y_up;
        }
    }
    Ok(OracleBounds {
        q: q_mass / p_event,
        q_lo: lo_mass / p_qualify,
        q_up: up_mass / p_qualify,
        p_event,
        p_qualify,
        propensity: p_agree / p_qualify,
        naive: (p_naive > 0.0).then(|| naive_mass / p_naive),
    })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::hypothesis::{HypothesisSpec, OutcomeSpec, RegionPredicate};

    pub(crate) fn whole_space_spec(w: &DiscreteWorld, actions: Vec<usize>, y_lo: f64, y_up: f64) -> HypothesisSpec {
        let t = actions.len();
        HypothesisSpec {
            id: "oracle".into(),
            label: String::new(),
            t,
            actions,
            region: RegionPredicate::whole_space(t),
            outcome: OutcomeSpec { t, feature: w.outcome_feature.clone(), y_lo, y_up },
        }
    }

    #[test]
    fn laws_sum_to_one() {
        for name in FIXTURE_NAMES {
            let w = fixture(name).unwrap();
            let s: f64 = observational_law(&w).values().sum();
            assert!((s - 1.0).abs() < 1e-12, "{name}");
            let a = vec![1; w.horizon];
            let s: f64 = interventional_law(&w, &a).unwrap().values().sum();
            assert!((s - 1.0).abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn brake_pad_values() {
        let w = brake_pad_world();
        let o = exact_bounds_oracle(&w, &whole_space_spec(&w, vec![AGGRESSIVE], 0.0, 1.0)).unwrap();
        assert!((o.q - 0.5).abs() < 1e-15);
        assert!((o.q_lo - 0.45).abs() < 1e-15);
        assert!((o.q_up - 0.95).abs() < 1e-15);
        assert!((o.naive.unwrap() - 0.9).abs() < 1e-15);
        assert!((o.propensity - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_policy_collapses_bounds() {
        let mut w = brake_pad_world();
        w.policy[0] = vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]];
        let o = exact_bounds_oracle(&w, &whole_space_spec(&w, vec![AGGRESSIVE], 0.0, 1.0)).unwrap();
        assert!((o.q_lo - o.q).abs() < 1e-15 && (o.q_up - o.q).abs() < 1e-15);
    }

    #[test]
    fn degenerate_outcome_interval() {
        let w = brake_pad_world();
        let o = exact_bounds_oracle(&w, &whole_space_spec(&w, vec![GENTLE], 0.3, 0.3)).unwrap();
        assert_eq!((o.q, o.q_lo, o.q_up), (0.3, 0.3, 0.3));
    }

    #[test]
    fn zero_probability_event() {
        let w = brake_pad_world();
        let mut spec = whole_space_spec(&w, vec![GENTLE], 0.0, 1.0);
        spec.region.steps[1] = vec![crate::hypothesis::Constraint::Member { feature: "stopped".into(), values: vec![7.0] }];
        assert!(matches!(exact_bounds_oracle(&w, &spec), Err(Error::ZeroProbabilityEvent)));
    }
}
