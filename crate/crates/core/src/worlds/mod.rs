//! Finite potential-outcome worlds with an unobserved confounder.
//!
//! A world draws a confounder `U`, then `X0 | U`, then for `s = 1..T`
//! alternates the agent's action `A_s | U, history` and the observation
//! `X_s | U, history, A_s`. Every table is explicit, so observational and
//! interventional laws can be enumerated exactly and used as ground truth.
//!
//! Histories are indexed in mixed radix over `(x0, a1, x1, ..., )` with `x0`
//! most significant; observations are indices into per-step value tables.
//!
//! Interventions follow the unit's own agent until it first deviates from
//! the target sequence. Without a [`CounterfactualOverride`] the deviation
//! changes nothing: counterfactual observations keep following the
//! dynamics. With an override, a deviating unit's counterfactual
//! observations are pinned to fixed values from the deviation onward, which
//! is how bound-attaining worlds are built without touching the
//! observational law. Pinning applies while the intervention follows the
//! override's action sequence; afterwards the dynamics take over again.

mod construct;
mod enumerate;
mod sample;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use construct::{nonidentifiability_pair, random_spec, random_world, RandomWorldConfig};
pub use enumerate::{exact_bounds_oracle, interventional_law, observational_law, Law, OracleBounds};
pub use sample::{sample_index, sample_observational};

use crate::error::{Error, Result};
use crate::trajectory::{Feature, FeatureSchema, ObservationalTrajectory, Step};

/// Full-joint size limit for exact enumeration.
pub const MAX_ATOMS: usize = 1_000_000;
pub const MAX_HORIZON: usize = 3;
const ROW_TOLERANCE: f64 = 1e-12;

/// Pins counterfactual observations of units that deviate from `actions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualOverride {
    pub actions: Vec<usize>,
    /// `fixed[s - 1]` indexes `step_spaces[s - 1]`.
    pub fixed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteWorld {
    pub name: String,
    pub horizon: usize,
    /// `P(U)`.
    pub confounder: Vec<f64>,
    /// Observation vectors of `X0`.
    pub x0_space: Vec<Vec<f64>>,
    /// `P(X0 | U)` as `[u][x0]`.
    pub x0_table: Vec<Vec<f64>>,
    pub action_cardinalities: Vec<usize>,
    /// `step_spaces[s - 1][x]` is the vector of observation `x` at step `s`.
    pub step_spaces: Vec<Vec<Vec<f64>>>,
    /// `policy[s - 1][u][h][a]` with `h` indexing `(x0, a1, x1, ..., x_{s-1})`.
    pub policy: Vec<Vec<Vec<Vec<f64>>>>,
    /// `dynamics[s - 1][u][h][x]` with `h` indexing `(x0, a1, x1, ..., a_s)`.
    pub dynamics: Vec<Vec<Vec<Vec<f64>>>>,
    pub schema: FeatureSchema,
    /// Step feature read by outcome functions on this world.
    pub outcome_feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "override")]
    pub override_: Option<CounterfactualOverride>,
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidWorld(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::InvalidWorld(format!("{what} sums to {s}")));
    }
    Ok(())
}

impl DiscreteWorld {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWorld(format!("{}: {m}", self.name)));
        self.schema.validate()?;
        let t = self.horizon;
        if t == 0 || t > MAX_HORIZON {
            return bad(format!("horizon {t} outside 1..={MAX_HORIZON}"));
        }
        if self.schema.horizon != t || self.schema.action_cardinalities != self.action_cardinalities {
            return bad("schema disagrees with the world's horizon or action spaces".into());
        }
        if self.step_spaces.len() != t || self.policy.len() != t || self.dynamics.len() != t {
            return bad("per-step tables must have one entry per step".into());
        }
        if self.confounder.is_empty() || self.x0_space.is_empty() {
            return bad("empty confounder or X0 space".into());
        }
        let atoms = self.atom_count();
        if atoms > MAX_ATOMS {
            return bad(format!("{atoms} atoms exceed the enumeration limit {MAX_ATOMS}"));
        }
        check_row(&self.confounder, "P(U)")?;
        let nu = self.confounder.len();
        if self.x0_table.len() != nu {
            return bad("P(X0|U) needs one row per confounder value".into());
        }
        for (u, row) in self.x0_table.iter().enumerate() {
            if row.len() != self.x0_space.len() {
                return bad(format!("P(X0|U={u}) has the wrong length"));
            }
            check_row(row, &format!("P(X0|U={u})"))?;
        }
        for x in &self.x0_space {
            if x.len() != self.schema.x0_features.len() {
                return bad("X0 vector length differs from the schema".into());
            }
        }
        for s in 1..=t {
            let space = &self.step_spaces[s - 1];
            if space.is_empty() {
                return bad(format!("empty observation space at step {s}"));
            }
            if space.iter().any(|x| x.len() != self.schema.step_features.len()) {
                return bad(format!("observation vector length differs from the schema at step {s}"));
            }
            let h = self.policy_histories(s);
            let na = self.action_cardinalities[s - 1];
            for (table, rows, cols, what) in [
                (&self.policy[s - 1], h, na, "policy"),
                (&self.dynamics[s - 1], h * na, space.len(), "dynamics"),
            ] {
                if table.len() != nu {
                    return bad(format!("{what} at step {s} needs one table per confounder value"));
                }
                for (u, tu) in table.iter().enumerate() {
                    if tu.len() != rows {
                        return bad(format!("{what} at step {s}, U={u}: expected {rows} rows, found {}", tu.len()));
                    }
                    for (i, row) in tu.iter().enumerate() {
                        if row.len() != cols {
                            return bad(format!("{what} at step {s}, U={u}, row {i}: expected {cols} columns"));
                        }
                        check_row(row, &format!("{what} at step {s}, U={u}, row {i}"))?;
                    }
                }
            }
        }
        if self.schema.step_index(&self.outcome_feature).is_none() {
            return Err(Error::UnknownFeature(self.outcome_feature.clone()));
        }
        if let Some(o) = &self.override_ {
            if o.actions.is_empty() || o.actions.len() > t || o.fixed.len() != o.actions.len() {
                return bad("override must give one action and one fixed value per step".into());
            }
            for (s, (&a, &x)) in o.actions.iter().zip(&o.fixed).enumerate() {
                if a >= self.action_cardinalities[s] || x >= self.step_spaces[s].len() {
                    return bad(format!("override entry at step {} out of range", s + 1));
                }
            }
        }
        Ok(())
    }

    /// `|U| |X0| prod_s |A_s| |X_s|`.
    pub fn atom_count(&self) -> usize {
        let mut n = self.confounder.len().saturating_mul(self.x0_space.len());
        for s in 0..self.horizon.min(self.step_spaces.len()).min(self.action_cardinalities.len()) {
            n = n
                .saturating_mul(self.action_cardinalities[s])
                .saturating_mul(self.step_spaces[s].len());
        }
        n
    }

    /// Number of histories `(x0, a1, x1, ..., x_{s-1})` seen by the policy at step `s`.
    pub fn policy_histories(&self, s: usize) -> usize {
        (1..s).fold(self.x0_space.len(), |h, k| {
            h * self.action_cardinalities[k - 1] * self.step_spaces[k - 1].len()
        })
    }

    fn radix(&self, pos: usize) -> usize {
        match pos {
            0 => self.x0_space.len(),
            p if p % 2 == 1 => self.action_cardinalities[p / 2],
            p => self.step_spaces[p / 2 - 1].len(),
        }
    }

    /// Mixed-radix index of a flat path `[x0, a1, x1, ...]`.
    pub fn history_index(&self, path: &[usize]) -> usize {
        path.iter().enumerate().fold(0, |h, (pos, &v)| h * self.radix(pos) + v)
    }

    /// `P(A_s = . | U = u, path)` where `path = [x0, a1, x1, ..., x_{s-1}]`.
    pub fn policy_row(&self, u: usize, path: &[usize]) -> &[f64] {
        let s = path.len().div_ceil(2);
        &self.policy[s - 1][u][self.history_index(path)]
    }

    /// `P(X_s = . | U = u, path)` where `path = [x0, a1, x1, ..., a_s]`.
    pub fn dynamics_row(&self, u: usize, path: &[usize]) -> &[f64] {
        let s = path.len() / 2;
        &self.dynamics[s - 1][u][self.history_index(path)]
    }

    /// Trajectory for a flat path `[x0, a1, x1, ..., a_k, x_k]`.
    pub fn trajectory(&self, path: &[usize]) -> ObservationalTrajectory {
        ObservationalTrajectory {
            x0: self.x0_space[path[0]].clone(),
            steps: path[1..]
                .chunks(2)
                .enumerate()
                .map(|(s, ax)| Step {
                    a: ax[0],
                    x: self.step_spaces[s][ax[1]].clone(),
                })
                .collect(),
        }
    }

    pub fn x0_lookup(&self, x0: &[f64]) -> Option<usize> {
        self.x0_space.iter().position(|v| v.as_slice() == x0)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let w: DiscreteWorld = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_pretty() + "\n").map_err(|e| Error::io(path, e))
    }
}

// ── fixtures ────────────────────────────────────────────────────────────

pub const GENTLE: usize = 0;
pub const AGGRESSIVE: usize = 1;

/// Braking with unobserved pad wear.
///
/// `U = 0` is new pads, `U = 1` old, each with probability 1/2. Aggressive
/// braking stops the car for sure on new pads and never on old ones; gentle
/// braking stops it half the time either way. Drivers brake aggressively
/// with probability 0.9 on new pads and 0.1 on old ones.
pub fn brake_pad_world() -> DiscreteWorld {
    brake_pad_world_with(0.9, 0.1)
}

/// Brake-pad world with `P(A = aggressive | new) = p_new` and
/// `P(A = aggressive | old) = p_old`.
pub fn brake_pad_world_with(p_new: f64, p_old: f64) -> DiscreteWorld {
    let pol = |p: f64| vec![vec![1.0 - p, p]];
    let dyn_ = |p_agg: f64| vec![vec![0.5, 0.5], vec![1.0 - p_agg, p_agg]];
    let schema = FeatureSchema::new(1, vec![], vec![Feature::binary("stopped")], vec![2]).expect("valid schema");
    let w = DiscreteWorld {
        name: format!("brake-pad(p_new={p_new},p_old={p_old})"),
        horizon: 1,
        confounder: vec![0.5, 0.5],
        x0_space: vec![vec![]],
        x0_table: vec![vec![1.0], vec![1.0]],
        action_cardinalities: vec![2],
        step_spaces: vec![vec![vec![0.0], vec![1.0]]],
        policy: vec![vec![pol(p_new), pol(p_old)]],
        dynamics: vec![vec![dyn_(1.0), dyn_(0.0)]],
        schema,
        outcome_feature: "stopped".into(),
        override_: None,
    };
    w.validate().expect("brake-pad world is valid");
    w
}

/// Two-step treatment world: a binary risk marker in `X0`, a three-level
/// severity score each step, treatment more likely (and more effective) in
/// the hidden frail group.
pub fn two_step_treatment_world() -> DiscreteWorld {
    let schema = FeatureSchema::new(
        2,
        vec![Feature::binary("risk")],
        vec![Feature::continuous("severity")],
        vec![2, 2],
    )
    .expect("valid schema");
    let space = vec![vec![0.0], vec![1.0], vec![2.0]];
    // P(X0 | U): frail units (U=1) are flagged at-risk more often.
    let x0_table = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
    // Step 1 policy, rows over x0.
    let pol1 = vec![
        vec![vec![0.8, 0.2], vec![0.6, 0.4]],
        vec![vec![0.3, 0.7], vec![0.1, 0.9]],
    ];
    let sev = |u: usize, treat: usize, base: usize| -> Vec<f64> {
        let mut p = match (u, treat) {
            (0, 0) => [0.5, 0.4, 0.1],
            (0, _) => [0.6, 0.35, 0.05],
            (_, 0) => [0.1, 0.3, 0.6],
            _ => [0.4, 0.4, 0.2],
        };
        if base >= 1 {
            p = [p[0] * 0.8, p[1], p[2] + p[0] * 0.2];
        }
        p.to_vec()
    };
    // Step 1 dynamics rows over (x0, a1).
    let dyn1 = (0..2)
        .map(|u| (0..2).flat_map(|x0| (0..2).map(move |a| (x0, a))).map(|(x0, a)| sev(u, a, x0)).collect())
        .collect();
    // Step 2 policy rows over (x0, a1, x1): treat when severe, more so if frail.
    let pol2 = (0..2)
        .map(|u| {
            let mut rows = Vec::new();
            for _x0 in 0..2 {
                for a1 in 0..2 {
                    for x1 in 0..3 {
                        let p = (0.15 + 0.3 * x1 as f64 + 0.1 * a1 as f64 + 0.15 * u as f64).min(0.95);
                        rows.push(vec![1.0 - p, p]);
                    }
                }
            }
            rows
        })
        .collect();
    // Step 2 dynamics rows over (x0, a1, x1, a2).
    let dyn2 = (0..2)
        .map(|u| {
            let mut rows = Vec::new();
            for _x0 in 0..2 {
                for _a1 in 0..2 {
                    for x1 in 0..3 {
                        for a2 in 0..2 {
                            rows.push(sev(u, a2, x1));
                        }
                    }
                }
            }
            rows
        })
        .collect();
    let w = DiscreteWorld {
        name: "two-step-treatment".into(),
        horizon: 2,
        confounder: vec![0.6, 0.4],
        x0_space: vec![vec![0.0], vec![1.0]],
        x0_table,
        action_cardinalities: vec![2, 2],
        step_spaces: vec![space.clone(), space],
        policy: vec![pol1, pol2],
        dynamics: vec![dyn1, dyn2],
        schema,
        outcome_feature: "severity".into(),
        override_: None,
    };
    w.validate().expect("two-step world is valid");
    w
}

/// Two-step world with deterministic dynamics: `X_s = X_{s-1} + a_s`
/// (capped at 2), so outcomes do not depend on the confounder even though
/// actions do.
pub fn two_step_deterministic_world() -> DiscreteWorld {
    let schema = FeatureSchema::new(2, vec![Feature::continuous("level")], vec![Feature::continuous("level")], vec![2, 2])
        .expect("valid schema");
    let space: Vec<Vec<f64>> = (0..3).map(|v| vec![v as f64]).collect();
    let onehot = |k: usize| (0..3).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let dyn1 = (0..2)
        .map(|_| (0..2).flat_map(|x0| (0..2).map(move |a| onehot((x0 + a).min(2)))).collect())
        .collect();
    let dyn2 = (0..2)
        .map(|_| {
            let mut rows = Vec::new();
            for _x0 in 0..2 {
                for _a1 in 0..2 {
                    for x1 in 0..3 {
                        for a2 in 0..2 {
                            rows.push(onehot((x1 + a2).min(2)));
                        }
                    }
                }
            }
            rows
        })
        .collect();
    let pol1 = vec![vec![vec![0.9, 0.1], vec![0.7, 0.3]], vec![vec![0.2, 0.8], vec![0.4, 0.6]]];
    let pol2 = (0..2)
        .map(|u| (0..2 * 2 * 3).map(|i| if (i + u) % 2 == 0 { vec![0.25, 0.75] } else { vec![0.85, 0.15] }).collect())
        .collect();
    let w = DiscreteWorld {
        name: "two-step-deterministic".into(),
        horizon: 2,
        confounder: vec![0.5, 0.5],
        x0_space: vec![vec![0.0], vec![1.0]],
        x0_table: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        action_cardinalities: vec![2, 2],
        step_spaces: vec![space.clone(), space],
        policy: vec![pol1, pol2],
        dynamics: vec![dyn1, dyn2],
        schema,
        outcome_feature: "level".into(),
        override_: None,
    };
    w.validate().expect("deterministic world is valid");
    w
}

/// In-repo fixtures by name.
pub fn fixture(name: &str) -> Option<DiscreteWorld> {
    match name {
        "brake-pad" => Some(brake_pad_world()),
        "brake-pad-high-propensity" => Some(brake_pad_world_with(0.99, 0.1)),
        "two-step-treatment" => Some(two_step_treatment_world()),
        "two-step-deterministic" => Some(two_step_deterministic_world()),
        _ => None,
    }
}

/// A fixture by name, or else a world JSON file at that path.
pub fn resolve_world(name_or_path: &str) -> Result<DiscreteWorld> {
    match fixture(name_or_path) {
        Some(w) => Ok(w),
        None => DiscreteWorld::load(name_or_path),
    }
}

pub const FIXTURE_NAMES: [&str; 4] = [
    "brake-pad",
    "brake-pad-high-propensity",
    "two-step-treatment",
    "two-step-deterministic",
];
