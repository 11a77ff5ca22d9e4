//! Twins backed by a [`DiscreteWorld`].

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::{fmt, str::FromStr};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{TwinError, TwinFactory, TwinSession};
use crate::seed;
use crate::worlds::{sample_index, DiscreteWorld};

/// Text form: `correct`, `propensity-blind`, or `shifted:<δ>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TwinMode {
    /// Samples from the world's interventional law given `x0`.
    Correct,
    /// As `Correct`, then adds `δ` to the outcome feature, clamped to the
    /// range of that feature in the world.
    Shifted(f64),
    /// Samples each step from the observational law given the history and
    /// the agent having chosen the target actions. This ignores that the
    /// agent's choices carry information about the confounder.
    PropensityBlind,
}

impl fmt::Display for TwinMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TwinMode::Correct => f.write_str("correct"),
            TwinMode::Shifted(d) => write!(f, "shifted:{d}"),
            TwinMode::PropensityBlind => f.write_str("propensity-blind"),
        }
    }
}

impl FromStr for TwinMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "correct" => Ok(TwinMode::Correct),
            "propensity-blind" => Ok(TwinMode::PropensityBlind),
            _ => match s.strip_prefix("shifted:").map(str::parse::<f64>) {
                Some(Ok(d)) if d.is_finite() => Ok(TwinMode::Shifted(d)),
                _ => Err(format!("unknown twin mode `{s}` (expected correct, propensity-blind or shifted:<delta>)")),
            },
        }
    }
}

impl Serialize for TwinMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TwinMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl TwinMode {
    pub fn label(&self) -> String {
        match self {
            TwinMode::Correct => "correct".into(),
            TwinMode::Shifted(d) => format!("shifted({d})"),
            TwinMode::PropensityBlind => "propensity-blind".into(),
        }
    }
}

/// Factory of world-backed sessions.
#[derive(Clone, Debug)]
pub struct WorldTwin {
    world: Arc<DiscreteWorld>,
    mode: TwinMode,
    workers: usize,
    clamped: Arc<AtomicUsize>,
    fallbacks: Arc<AtomicUsize>,
}

impl WorldTwin {
    pub fn new(world: DiscreteWorld, mode: TwinMode) -> Self {
        WorldTwin {
            world: Arc::new(world),
            mode,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            clamped: Arc::default(),
            fallbacks: Arc::default(),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn world(&self) -> &DiscreteWorld {
        &self.world
    }

    pub fn mode(&self) -> TwinMode {
        self.mode
    }

    /// Shifted outcomes that left the world's range and were clamped.
    pub fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Propensity-blind steps whose conditioning event had zero probability,
    /// where the step was drawn from the unconditioned posterior instead.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    pub fn session(&self) -> WorldSession {
        let w = &self.world;
        let out_idx = w.schema.step_index(&w.outcome_feature).expect("validated world");
        let ranges = w
            .step_spaces
            .iter()
            .map(|space| {
                space.iter().map(|x| x[out_idx]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                })
            })
            .collect();
        WorldSession {
            twin: self.clone(),
            rng: seed::rng(0),
            out_idx,
            ranges,
            u: 0,
            weights: Vec::new(),
            path: Vec::new(),
            agent_path: true,
            deviated: false,
        }
    }
}

impl TwinFactory for WorldTwin {
    fn twin_id(&self) -> String {
        format!("world:{}:{}", self.world.name, self.mode.label())
    }

    fn workers(&self) -> usize {
        self.workers
    }

    fn open_worker(&self) -> Result<Box<dyn TwinSession>, TwinError> {
        Ok(Box::new(self.session()))
    }
}

pub struct WorldSession {
    twin: WorldTwin,
    rng: ChaCha8Rng,
    out_idx: usize,
    /// Range of the outcome feature at each step.
    ranges: Vec<(f64, f64)>,
    u: usize,
    /// Posterior over the confounder (propensity-blind mode).
    weights: Vec<f64>,
    /// `[x0, a1, x1, ...]` of the counterfactual path so far.
    path: Vec<usize>,
    /// Whether the actions so far follow the world's override sequence.
    agent_path: bool,
    deviated: bool,
}

impl WorldSession {
    fn world(&self) -> &DiscreteWorld {
        &self.twin.world
    }

    fn step_index(&mut self, a: usize) -> Result<usize, TwinError> {
        let w = self.twin.world.clone();
        let s = self.path.len() / 2 + 1;
        if self.path.is_empty() {
            return Err(TwinError::Session("step before init".into()));
        }
        if s > w.horizon {
            return Err(TwinError::Session(format!("step {s} beyond horizon {}", w.horizon)));
        }
        if a >= w.action_cardinalities[s - 1] {
            return Err(TwinError::Session(format!("action {a} out of range at step {s}")));
        }
        match self.twin.mode {
            TwinMode::Correct | TwinMode::Shifted(_) => {
                let pinned = w.override_.as_ref().filter(|o| {
                    self.agent_path && s <= o.actions.len() && o.actions[s - 1] == a
                });
                if pinned.is_none() {
                    self.agent_path = false;
                }
                if let Some(o) = pinned {
                    if !self.deviated {
                        let p_agree = w.policy_row(self.u, &self.path)[a];
                        self.deviated = self.rng.gen::<f64>() >= p_agree;
                    }
                    if self.deviated {
                        self.path.push(a);
                        return Ok(o.fixed[s - 1]);
                    }
                }
                self.path.push(a);
                Ok(sample_index(&mut self.rng, w.dynamics_row(self.u, &self.path)))
            }
            TwinMode::PropensityBlind => {
                let prior = self.weights.clone();
                for (u, wt) in self.weights.iter_mut().enumerate() {
                    *wt *= w.policy_row(u, &self.path)[a];
                }
                if self.weights.iter().sum::<f64>() <= 0.0 {
                    self.twin.fallbacks.fetch_add(1, Ordering::Relaxed);
                    self.weights = prior;
                }
                self.path.push(a);
                let total: f64 = self.weights.iter().sum();
                let n_x = w.step_spaces[s - 1].len();
                let mut mix = vec![0.0; n_x];
                for (u, &wt) in self.weights.iter().enumerate() {
                    if wt > 0.0 {
                        for (m, p) in mix.iter_mut().zip(w.dynamics_row(u, &self.path)) {
                            *m += wt / total * p;
                        }
                    }
                }
                let x = sample_index(&mut self.rng, &mix);
                for (u, wt) in self.weights.iter_mut().enumerate() {
                    *wt *= w.dynamics_row(u, &self.path)[x];
                }
                // Renormalise to keep weights away from underflow.
                let z: f64 = self.weights.iter().sum();
                if z > 0.0 {
                    self.weights.iter_mut().for_each(|v| *v /= z);
                }
                Ok(x)
            }
        }
    }
}

impl TwinSession for WorldSession {
    fn begin(&mut self, seed: u64) -> Result<(), TwinError> {
        self.rng = seed::rng(seed);
        Ok(())
    }

    fn init(&mut self, x0: &[f64]) -> Result<(), TwinError> {
        let w = self.world();
        let i = w
            .x0_lookup(x0)
            .ok_or_else(|| TwinError::Session(format!("initial state {x0:?} is not in the world's X0 space")))?;
        let posterior: Vec<f64> = w.confounder.iter().zip(&w.x0_table).map(|(pu, row)| pu * row[i]).collect();
        let z: f64 = posterior.iter().sum();
        if z <= 0.0 {
            return Err(TwinError::Session(format!("initial state {x0:?} has probability zero")));
        }
        let posterior: Vec<f64> = posterior.iter().map(|p| p / z).collect();
        self.path = vec![i];
        self.agent_path = true;
        self.deviated = false;
        match self.twin.mode {
            TwinMode::PropensityBlind => self.weights = posterior,
            _ => self.u = sample_index(&mut self.rng, &posterior),
        }
        Ok(())
    }

    fn step(&mut self, a: usize, _raw: Option<&[f64]>) -> Result<Vec<f64>, TwinError> {
        let x = self.step_index(a)?;
        self.path.push(x);
        let s = self.path.len() / 2;
        let mut v = self.world().step_spaces[s - 1][x].clone();
        if let TwinMode::Shifted(delta) = self.twin.mode {
            let (lo, hi) = self.ranges[s - 1];
            let shifted = v[self.out_idx] + delta;
            let clamped = shifted.clamp(lo, hi);
            if clamped != shifted {
                self.twin.clamped.fetch_add(1, Ordering::Relaxed);
            }
            v[self.out_idx] = clamped;
        }
        Ok(v)
    }

    fn reset(&mut self) -> Result<(), TwinError> {
        self.path.clear();
        self.weights.clear();
        Ok(())
    }
}
