//! Generated worlds: bound-attaining pairs and random instances.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{observational_law, exact_bounds_oracle, CounterfactualOverride, DiscreteWorld};
use crate::error::{Error, Result};
use crate::hypothesis::{Constraint, HypothesisSpec, OutcomeSpec, RegionPredicate};
use crate::seed;
use crate::trajectory::{Feature, FeatureSchema};

/// Two worlds with the observational law of `w` whose targets equal the
/// lower and upper bounds of `spec` on `w`.
///
/// Units that deviate from `spec.actions` get their counterfactual
/// observations pinned to points of the region; at `t` the pinned point
/// minimises (respectively maximises) the clipped outcome. The observed
/// path of every unit is untouched.
pub fn nonidentifiability_pair(w: &DiscreteWorld, spec: &HypothesisSpec) -> Result<(DiscreteWorld, DiscreteWorld)> {
    let c = spec.compile(&w.schema)?;
    let t = spec.t;
    let deviating: f64 = observational_law(w)
        .iter()
        .filter(|(path, _)| (0..t).any(|s| path[2 * s + 1] != spec.actions[s]))
        .map(|(_, p)| p)
        .sum();
    if deviating <= 0.0 {
        return Err(Error::Precondition(
            "the agent never deviates from the target actions, so the target is identified".into(),
        ));
    }
    let outcome_idx = w
        .schema
        .step_index(&spec.outcome.feature)
        .ok_or_else(|| Error::UnknownFeature(spec.outcome.feature.clone()))?;

    let mut fixed = Vec::with_capacity(t);
    for s in 1..t {
        let x = (0..w.step_spaces[s - 1].len())
            .find(|&x| c.region.step_contains(s, &w.step_spaces[s - 1][x]))
            .ok_or_else(|| Error::Precondition(format!("region at step {s} contains no observation of the world")))?;
        fixed.push(x);
    }
    let inside: Vec<(usize, f64)> = w.step_spaces[t - 1]
        .iter()
        .enumerate()
        .filter(|(_, x)| c.region.step_contains(t, x))
        .map(|(i, x)| (i, spec.outcome.clip(x[outcome_idx])))
        .collect();
    let (&(i_min, y_min), &(i_max, y_max)) = match (
        inside.iter().min_by(|a, b| a.1.total_cmp(&b.1)),
        inside.iter().max_by(|a, b| a.1.total_cmp(&b.1)),
    ) {
        (Some(lo), Some(up)) => (lo, up),
        _ => return Err(Error::Precondition(format!("region at step {t} contains no observation of the world"))),
    };
    if y_min != spec.outcome.y_lo || y_max != spec.outcome.y_up {
        return Err(Error::Precondition(format!(
            "the outcome takes values in [{y_min}, {y_max}] on the region, which does not attain [{}, {}]",
            spec.outcome.y_lo, spec.outcome.y_up
        )));
    }
    let make = |last: usize, tag: &str| {
        let mut v = w.clone();
        let mut f = fixed.clone();
        f.push(last);
        v.name = format!("{}#{tag}", w.name);
        v.override_ = Some(CounterfactualOverride {
            actions: spec.actions.clone(),
            fixed: f,
        });
        v
    };
    Ok((make(i_min, "lower"), make(i_max, "upper")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomWorldConfig {
    pub horizon: usize,
    pub confounders: usize,
    pub x0_values: usize,
    pub actions: usize,
    pub observations: usize,
    /// Policy rows are Dirichlet(1) draws raised to this power and
    /// renormalised; values above 1 make actions depend more sharply on the
    /// confounder.
    pub policy_sharpness: f64,
}

impl Default for RandomWorldConfig {
    fn default() -> Self {
        RandomWorldConfig {
            horizon: 2,
            confounders: 3,
            x0_values: 2,
            actions: 2,
            observations: 3,
            policy_sharpness: 1.0,
        }
    }
}

fn dirichlet_row<R: Rng>(rng: &mut R, k: usize, power: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| (-(1.0 - rng.gen::<f64>()).ln()).powf(power)).collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 && s.is_finite() {
        w.iter().map(|v| v / s).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

/// Random world with Dirichlet(1) rows. `X0` is one categorical feature `z`;
/// every step observes one feature `y` on an even grid in `[0, 1]`.
pub fn random_world(seed: u64, cfg: &RandomWorldConfig) -> Result<DiscreteWorld> {
    if cfg.observations < 2 || cfg.actions == 0 || cfg.confounders == 0 || cfg.x0_values == 0 {
        return Err(Error::InvalidArgument("random world needs nonempty spaces and at least two observations".into()));
    }
    let mut rng = seed::rng(seed);
    let t = cfg.horizon;
    let schema = FeatureSchema::new(
        t,
        vec![Feature::categorical("z", cfg.x0_values as u32)],
        vec![Feature::continuous("y")],
        vec![cfg.actions; t],
    )?;
    let space: Vec<Vec<f64>> = (0..cfg.observations)
        .map(|i| vec![i as f64 / (cfg.observations - 1) as f64])
        .collect();
    let mut w = DiscreteWorld {
        name: format!("random#{seed}"),
        horizon: t,
        confounder: dirichlet_row(&mut rng, cfg.confounders, 1.0),
        x0_space: (0..cfg.x0_values).map(|i| vec![i as f64]).collect(),
        x0_table: Vec::new(),
        action_cardinalities: vec![cfg.actions; t],
        step_spaces: vec![space; t],
        policy: Vec::new(),
        dynamics: Vec::new(),
        schema,
        outcome_feature: "y".into(),
        override_: None,
    };
    if w.atom_count() > super::MAX_ATOMS {
        return Err(Error::InvalidWorld(format!("{} atoms exceed the enumeration limit", w.atom_count())));
    }
    w.x0_table = (0..cfg.confounders).map(|_| dirichlet_row(&mut rng, cfg.x0_values, 1.0)).collect();
    for s in 1..=t {
        let h = w.policy_histories(s);
        w.policy.push(
            (0..cfg.confounders)
                .map(|_| (0..h).map(|_| dirichlet_row(&mut rng, cfg.actions, cfg.policy_sharpness)).collect())
                .collect(),
        );
        w.dynamics.push(
            (0..cfg.confounders)
                .map(|_| (0..h * cfg.actions).map(|_| dirichlet_row(&mut rng, cfg.observations, 1.0)).collect())
                .collect(),
        );
    }
    w.validate()?;
    Ok(w)
}

/// Random spec with positive interventional support on `w`.
///
/// Each timestep is constrained with probability 1/2 by a random nonempty
/// value set of one feature. `[y_lo, y_up]` is drawn inside the range of the
/// outcome over the region at `t`, so both ends are attained by clipping.
pub fn random_spec(w: &DiscreteWorld, seed: u64) -> Result<HypothesisSpec> {
    let mut rng = seed::rng(seed);
    let out_idx = w
        .schema
        .step_index(&w.outcome_feature)
        .ok_or_else(|| Error::UnknownFeature(w.outcome_feature.clone()))?;
    for _ in 0..200 {
        let t = rng.gen_range(1..=w.horizon);
        let actions: Vec<usize> = (0..t).map(|s| rng.gen_range(0..w.action_cardinalities[s])).collect();
        let mut steps = vec![Vec::new(); t + 1];
        for (s, conj) in steps.iter_mut().enumerate() {
            let features = w.schema.features_at(s);
            if features.is_empty() || !rng.gen_bool(0.5) {
                continue;
            }
            let fi = rng.gen_range(0..features.len());
            let space: &[Vec<f64>] = if s == 0 { &w.x0_space } else { &w.step_spaces[s - 1] };
            let values: BTreeSet<u64> = space.iter().map(|x| x[fi].to_bits()).collect();
            let mut chosen: Vec<f64> = values
                .iter()
                .filter(|_| rng.gen_bool(0.6))
                .map(|&b| f64::from_bits(b))
                .collect();
            if chosen.is_empty() {
                let all: Vec<u64> = values.into_iter().collect();
                chosen.push(f64::from_bits(all[rng.gen_range(0..all.len())]));
            }
            conj.push(Constraint::Member {
                feature: features[fi].name.clone(),
                values: chosen,
            });
        }
        let region = RegionPredicate { steps };
        let compiled = region.compile(&w.schema)?;
        let ys: Vec<f64> = w.step_spaces[t - 1]
            .iter()
            .filter(|x| compiled.step_contains(t, x))
            .map(|x| x[out_idx])
            .collect();
        let (Some(lo), Some(hi)) = (
            ys.iter().copied().min_by(f64::total_cmp),
            ys.iter().copied().max_by(f64::total_cmp),
        ) else {
            continue;
        };
        let mut pair = [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)];
        pair.sort_by(f64::total_cmp);
        let spec = HypothesisSpec {
            id: format!("random-spec#{seed}"),
            label: String::new(),
            t,
            actions,
            region,
            outcome: OutcomeSpec {
                t,
                feature: w.outcome_feature.clone(),
                y_lo: pair[0],
                y_up: pair[1],
            },
        };
        match exact_bounds_oracle(w, &spec) {
            Ok(_) => return Ok(spec),
            Err(Error::ZeroProbabilityEvent) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Precondition("no supported random spec found".into()))
}
