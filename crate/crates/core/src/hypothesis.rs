//! Hypothesis parameters `(t, f, a_{1:t}, B_{0:t})` and their generation
//! from held-out data.
//!
//! A region `B_{0:t}` is a per-timestep conjunction of box constraints. The
//! outcome `f` reads one step feature at `t` and clips it to `[y_lo, y_up]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{quantile, quantile_sorted};
use crate::trajectory::{FeatureKind, FeatureSchema, ObservationalTrajectory, TrajectoryDataset};

/// One atomic condition on a named feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Constraint {
    /// `lo <= v < hi`, or `lo <= v <= hi` when `closed_hi`. Missing ends are
    /// unbounded.
    Interval {
        feature: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
        #[serde(default)]
        closed_hi: bool,
    },
    /// `v` is one of `values`.
    Member { feature: String, values: Vec<f64> },
}

impl Constraint {
    pub fn feature(&self) -> &str {
        match self {
            Constraint::Interval { feature, .. } | Constraint::Member { feature, .. } => feature,
        }
    }

    fn holds(&self, v: f64) -> bool {
        match self {
            Constraint::Interval {
                lo, hi, closed_hi, ..
            } => {
                lo.map_or(true, |lo| v >= lo)
                    && hi.map_or(true, |hi| if *closed_hi { v <= hi } else { v < hi })
            }
            Constraint::Member { values, .. } => values.contains(&v),
        }
    }
}

/// `B_{0:t}`: `steps[s]` constrains `X_s`. Timesteps beyond `steps.len()`
/// are unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionPredicate {
    pub steps: Vec<Vec<Constraint>>,
}

impl RegionPredicate {
    pub fn whole_space(t: usize) -> Self {
        RegionPredicate {
            steps: vec![Vec::new(); t + 1],
        }
    }

    /// Resolves feature names against `schema`.
    pub fn compile(&self, schema: &FeatureSchema) -> Result<CompiledRegion> {
        let steps = self
            .steps
            .iter()
            .enumerate()
            .map(|(s, conj)| {
                conj.iter()
                    .map(|c| {
                        let idx = schema.feature_index(s, c.feature())?;
                        if let Constraint::Interval { lo: Some(lo), hi: Some(hi), .. } = c {
                            if lo > hi {
                                return Err(Error::InvalidHypothesis(format!(
                                    "interval on `{}` has lo {lo} > hi {hi}",
                                    c.feature()
                                )));
                            }
                        }
                        Ok((idx, c.clone()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledRegion { steps })
    }
}

/// Region with feature indices resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledRegion {
    steps: Vec<Vec<(usize, Constraint)>>,
}

impl CompiledRegion {
    /// True iff `X_s` satisfies its conjunction for every `s <= upto`.
    pub fn contains_prefix(&self, traj: &ObservationalTrajectory, upto: usize) -> bool {
        self.steps
            .iter()
            .take(upto + 1)
            .enumerate()
            .all(|(s, conj)| {
                let x = traj.observation(s);
                conj.iter().all(|(i, c)| c.holds(x[*i]))
            })
    }

    /// Whether `x` satisfies the conjunction at timestep `s`.
    pub fn step_contains(&self, s: usize, x: &[f64]) -> bool {
        self.steps
            .get(s)
            .map_or(true, |conj| conj.iter().all(|(i, c)| c.holds(x[*i])))
    }

    /// Membership of explicit observation vectors `x_{0:s}`.
    pub fn contains(&self, xs: &[&[f64]]) -> bool {
        self.steps
            .iter()
            .zip(xs)
            .all(|(conj, x)| conj.iter().all(|(i, c)| c.holds(x[*i])))
    }
}

/// `f(x_{0:t}) = clip((x_t)_i, y_lo, y_up)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub t: usize,
    pub feature: String,
    pub y_lo: f64,
    pub y_up: f64,
}

impl OutcomeSpec {
    pub fn range(&self) -> f64 {
        self.y_up - self.y_lo
    }

    pub fn clip(&self, raw: f64) -> f64 {
        raw.max(self.y_lo).min(self.y_up)
    }
}

/// Raw and clipped outcome of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeValue {
    pub raw: f64,
    pub clipped: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    pub id: String,
    /// Group tag, e.g. the covariate bins that built the region.
    #[serde(default)]
    pub label: String,
    pub t: usize,
    pub actions: Vec<usize>,
    pub region: RegionPredicate,
    pub outcome: OutcomeSpec,
}

impl HypothesisSpec {
    pub fn quantity(&self) -> &str {
        &self.outcome.feature
    }

    /// `y_lo == y_up`: the bounds collapse and the test is uninformative.
    pub fn is_degenerate(&self) -> bool {
        self.outcome.y_up <= self.outcome.y_lo
    }

    pub fn compile(&self, schema: &FeatureSchema) -> Result<CompiledSpec> {
        let bad = |m: String| Err(Error::InvalidHypothesis(format!("{}: {m}", self.id)));
        if self.t == 0 || self.t > schema.horizon {
            return bad(format!("t = {} outside 1..={}", self.t, schema.horizon));
        }
        if self.outcome.t != self.t {
            return bad(format!("outcome timestep {} differs from t = {}", self.outcome.t, self.t));
        }
        if self.actions.len() != self.t {
            return bad(format!("{} actions for t = {}", self.actions.len(), self.t));
        }
        for (s, (&a, &card)) in self.actions.iter().zip(&schema.action_cardinalities).enumerate() {
            if a >= card {
                return bad(format!("action {a} at step {} out of range 0..{card}", s + 1));
            }
        }
        if self.region.steps.len() > self.t + 1 {
            return bad(format!(
                "region has {} timesteps, expected at most {}",
                self.region.steps.len(),
                self.t + 1
            ));
        }
        let (lo, up) = (self.outcome.y_lo, self.outcome.y_up);
        if !(lo.is_finite() && up.is_finite() && lo <= up) {
            return bad(format!("outcome interval [{lo}, {up}] is not a finite interval"));
        }
        let outcome_index = schema
            .step_index(&self.outcome.feature)
            .ok_or_else(|| Error::UnknownFeature(self.outcome.feature.clone()))?;
        Ok(CompiledSpec {
            region: self.region.compile(schema)?,
            outcome_index,
            spec: self.clone(),
        })
    }
}

/// A spec bound to a schema, ready for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledSpec {
    pub spec: HypothesisSpec,
    pub region: CompiledRegion,
    outcome_index: usize,
}

impl CompiledSpec {
    pub fn t(&self) -> usize {
        self.spec.t
    }

    pub fn actions(&self) -> &[usize] {
        &self.spec.actions
    }

    pub fn y_lo(&self) -> f64 {
        self.spec.outcome.y_lo
    }

    pub fn y_up(&self) -> f64 {
        self.spec.outcome.y_up
    }

    /// `f` at timestep `t`; the trajectory must have at least `t` steps.
    pub fn outcome(&self, traj: &ObservationalTrajectory) -> OutcomeValue {
        let raw = traj.observation(self.spec.t)[self.outcome_index];
        OutcomeValue {
            raw,
            clipped: self.spec.outcome.clip(raw),
        }
    }

    pub fn in_region(&self, traj: &ObservationalTrajectory, upto: usize) -> bool {
        self.region.contains_prefix(traj, upto)
    }
}

pub fn load_hypotheses(path: impl AsRef<Path>) -> Result<Vec<HypothesisSpec>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_hypotheses(path: impl AsRef<Path>, specs: &[HypothesisSpec]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(specs)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

// ── generation ───────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MedianMode {
    /// A separate held-out median at every timestep.
    #[default]
    PerTimestep,
    /// One median over all timesteps at which the quantity is recorded.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub quantities: Vec<String>,
    pub q_lo: f64,
    pub q_up: f64,
    /// Binary or categorical `x0` feature; each value is one bin.
    #[serde(default)]
    pub sex_feature: Option<String>,
    /// `x0` feature split at its held-out quartiles.
    #[serde(default)]
    pub age_feature: Option<String>,
    #[serde(default)]
    pub median_mode: MedianMode,
}

impl GenerationConfig {
    pub fn new(quantities: &[&str]) -> Self {
        GenerationConfig {
            quantities: quantities.iter().map(|q| q.to_string()).collect(),
            q_lo: 0.2,
            q_up: 0.8,
            sex_feature: None,
            age_feature: None,
            median_mode: MedianMode::PerTimestep,
        }
    }
}

struct Binner {
    feature: String,
    index: usize,
    /// Edges for interval bins, or the admissible values for member bins.
    cuts: Vec<f64>,
    member: bool,
}

impl Binner {
    fn bin(&self, v: f64) -> usize {
        if self.member {
            self.cuts.iter().position(|&c| c == v).expect("value validated by schema")
        } else {
            self.cuts.iter().filter(|&&e| v >= e).count()
        }
    }

    fn constraint(&self, bin: usize) -> Constraint {
        if self.member {
            return Constraint::Member {
                feature: self.feature.clone(),
                values: vec![self.cuts[bin]],
            };
        }
        let top = bin == self.cuts.len();
        Constraint::Interval {
            feature: self.feature.clone(),
            lo: bin.checked_sub(1).map(|i| self.cuts[i]),
            hi: (!top).then(|| self.cuts[bin]),
            closed_hi: top,
        }
    }
}

fn quartile_edges(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .map(|&q| quantile_sorted(&sorted, q).expect("nonempty"))
        .collect();
    edges.dedup();
    edges
}

/// Builds one spec per supported `(t, a_{1:t}, B_{0:t})` for every quantity.
///
/// Regions are the cross product of sex bins, age-quartile bins, and a
/// below/above-median split of the quantity at each timestep where it is
/// recorded. Only combinations with at least one matching held-out
/// trajectory are emitted; `[y_lo, y_up]` are the `q_lo`/`q_up` quantiles of
/// the quantity at `t` over that support.
pub fn generate_hypotheses(d0: &TrajectoryDataset, cfg: &GenerationConfig) -> Result<Vec<HypothesisSpec>> {
    if d0.is_empty() {
        return Err(Error::InvalidArgument("held-out dataset is empty".into()));
    }
    if !(0.0 <= cfg.q_lo && cfg.q_lo < cfg.q_up && cfg.q_up <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile levels must satisfy 0 <= q_lo < q_up <= 1, got {} and {}",
            cfg.q_lo, cfg.q_up
        )));
    }
    let schema = d0.schema();
    let records = d0.records();

    let sex = match &cfg.sex_feature {
        None => None,
        Some(name) => {
            let index = schema.x0_index(name).ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            let cuts = match schema.x0_features[index].kind {
                FeatureKind::Binary => vec![0.0, 1.0],
                FeatureKind::Categorical { cardinality } => (0..cardinality).map(f64::from).collect(),
                FeatureKind::Continuous => {
                    return Err(Error::InvalidArgument(format!(
                        "sex feature `{name}` must be binary or categorical"
                    )))
                }
            };
            Some(Binner { feature: name.clone(), index, cuts, member: true })
        }
    };
    let age = match &cfg.age_feature {
        None => None,
        Some(name) => {
            let index = schema.x0_index(name).ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            let ages: Vec<f64> = records.iter().map(|r| r.x0[index]).collect();
            Some(Binner { feature: name.clone(), index, cuts: quartile_edges(&ages), member: false })
        }
    };

    let mut out = Vec::new();
    for q in &cfg.quantities {
        let step_idx = schema.step_index(q).ok_or_else(|| Error::UnknownFeature(q.clone()))?;
        let x0_idx = schema.x0_index(q);
        let value_at = |r: &ObservationalTrajectory, s: usize| {
            if s == 0 {
                r.x0[x0_idx.expect("only called when recorded at 0")]
            } else {
                r.steps[s - 1].x[step_idx]
            }
        };
        // Median split per timestep 0..=T (None where the quantity is absent).
        let timesteps: Vec<usize> = (0..=schema.horizon).filter(|&s| s > 0 || x0_idx.is_some()).collect();
        let mut medians: Vec<Option<f64>> = vec![None; schema.horizon + 1];
        match cfg.median_mode {
            MedianMode::PerTimestep => {
                for &s in &timesteps {
                    let vals: Vec<f64> = records.iter().map(|r| value_at(r, s)).collect();
                    medians[s] = quantile(&vals, 0.5);
                }
            }
            MedianMode::Pooled => {
                let vals: Vec<f64> = timesteps
                    .iter()
                    .flat_map(|&s| records.iter().map(move |r| value_at(r, s)))
                    .collect();
                let m = quantile(&vals, 0.5);
                for &s in &timesteps {
                    medians[s] = m;
                }
            }
        }
        let median_binner = |s: usize| Binner {
            feature: q.clone(),
            index: if s == 0 { x0_idx.unwrap() } else { step_idx },
            cuts: vec![medians[s].expect("median exists")],
            member: false,
        };

        for t in 1..=schema.horizon {
            let cond: Vec<usize> = timesteps.iter().copied().filter(|&s| s <= t).collect();
            // key: (actions, sex bin, age bin, median bits) -> outcome values at t
            let mut groups: BTreeMap<(Vec<usize>, usize, usize, Vec<usize>), Vec<f64>> = BTreeMap::new();
            for r in records {
                let actions: Vec<usize> = r.steps[..t].iter().map(|s| s.a).collect();
                let sb = sex.as_ref().map_or(0, |b| b.bin(r.x0[b.index]));
                let ab = age.as_ref().map_or(0, |b| b.bin(r.x0[b.index]));
                let bits: Vec<usize> = cond.iter().map(|&s| median_binner(s).bin(value_at(r, s))).collect();
                groups.entry((actions, sb, ab, bits)).or_default().push(r.steps[t - 1].x[step_idx]);
            }
            for ((actions, sb, ab, bits), mut values) in groups {
                values.sort_by(f64::total_cmp);
                let y_lo = quantile_sorted(&values, cfg.q_lo).expect("nonempty group");
                let y_up = quantile_sorted(&values, cfg.q_up).expect("nonempty group");
                let mut steps = vec![Vec::new(); t + 1];
                if let Some(b) = &sex {
                    steps[0].push(b.constraint(sb));
                }
                if let Some(b) = &age {
                    steps[0].push(b.constraint(ab));
                }
                for (&s, &bit) in cond.iter().zip(&bits) {
                    steps[s].push(median_binner(s).constraint(bit));
                }
                let a_str: Vec<String> = actions.iter().map(|a| a.to_string()).collect();
                let m_str: String = bits.iter().map(|b| b.to_string()).collect();
                let mut label = Vec::new();
                if let Some(b) = &sex {
                    label.push(format!("{}={}", b.feature, b.cuts[sb]));
                }
                if let Some(b) = &age {
                    label.push(format!("{}:q{}", b.feature, ab + 1));
                }
                label.push(format!("{q}:median-bits={m_str}"));
                out.push(HypothesisSpec {
                    id: format!("{q}-t{t}-a{}-s{sb}-g{ab}-m{m_str}", a_str.join(".")),
                    label: label.join(","),
                    t,
                    actions,
                    region: RegionPredicate { steps },
                    outcome: OutcomeSpec { t, feature: q.clone(), y_lo, y_up },
                });
            }
        }
    }
    Ok(out)
}
