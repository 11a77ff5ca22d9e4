//! Twin sessions and twin-data generation.
//!
//! A twin is driven one trajectory at a time through [`TwinSession`]:
//! `init(x0)`, then `step(a)` once per timestep, then `reset`. A
//! [`TwinFactory`] hands out one session object per worker thread; the
//! generator reuses it across trajectories and calls [`TwinSession::begin`]
//! with a per-trajectory seed before each one.

mod builtin;
mod external;
pub mod protocol;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use builtin::{TwinMode, WorldTwin};
pub use external::{ExternalTwin, ExternalTwinConfig};

use crate::error::{Error, Result};
use crate::seed;
use crate::trajectory::{record_from_value, ActionBinning, FeatureSchema, ObservationalTrajectory, Step, TrajectoryDataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwinError {
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("twin process exited")]
    Exited,
    #[error("could not start twin process: {0}")]
    Spawn(String),
    #[error("twin reported an error: {0}")]
    Remote(String),
    #[error("twin produced {found} values, schema expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Session(String),
    #[error("session {index} failed: {source}")]
    SessionFailed {
        index: usize,
        #[source]
        source: Box<TwinError>,
    },
}

/// One trajectory at a time; the object is reused after `reset`.
pub trait TwinSession: Send {
    /// Called before each trajectory with that trajectory's seed. Twins with
    /// their own randomness may ignore it.
    fn begin(&mut self, _seed: u64) -> std::result::Result<(), TwinError> {
        Ok(())
    }
    fn init(&mut self, x0: &[f64]) -> std::result::Result<(), TwinError>;
    /// `raw` carries representative doses for twins that consume them.
    fn step(&mut self, a: usize, raw: Option<&[f64]>) -> std::result::Result<Vec<f64>, TwinError>;
    fn reset(&mut self) -> std::result::Result<(), TwinError>;
}

pub trait TwinFactory: Sync {
    fn twin_id(&self) -> String;
    /// Number of sessions run concurrently.
    fn workers(&self) -> usize {
        1
    }
    /// Whether sessions expect raw doses alongside the action index.
    fn consumes_raw_doses(&self) -> bool {
        false
    }
    fn open_worker(&self) -> std::result::Result<Box<dyn TwinSession>, TwinError>;
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwinMeta {
    pub twin_id: String,
    pub seed: u64,
    /// Index into the source dataset of each record's `x0` (failed sessions
    /// included).
    pub x0_indices: Vec<usize>,
    /// Sessions that failed and were dropped, with their errors.
    #[serde(default)]
    pub failures: Vec<(usize, String)>,
}

/// `D̂(a_{1:t})`: twin trajectories generated under one action sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TwinDataset {
    pub actions: Vec<usize>,
    pub schema: FeatureSchema,
    /// Each record has exactly `actions.len()` steps, all tagged with `actions`.
    pub records: Vec<ObservationalTrajectory>,
    pub meta: TwinMeta,
}

#[derive(Serialize, Deserialize)]
struct Header {
    actions: Vec<usize>,
    #[serde(flatten)]
    meta: TwinMeta,
}

impl TwinDataset {
    /// Validates records against the schema and the action tag.
    pub fn from_records(
        schema: FeatureSchema,
        actions: Vec<usize>,
        records: Vec<ObservationalTrajectory>,
        meta: TwinMeta,
    ) -> Result<Self> {
        check_actions(&schema, &actions)?;
        for (index, r) in records.iter().enumerate() {
            schema
                .check_trajectory(r, actions.len())
                .map_err(|message| Error::SchemaViolation { index, message })?;
            if !r.actions().eq(actions.iter().copied()) {
                return Err(Error::SchemaViolation {
                    index,
                    message: "record actions differ from the dataset tag".into(),
                });
            }
        }
        Ok(TwinDataset {
            actions,
            schema,
            records,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The first `t` steps of every record, tagged with `actions[..t]`.
    pub fn prefix(&self, t: usize) -> TwinDataset {
        let t = t.min(self.actions.len());
        TwinDataset {
            actions: self.actions[..t].to_vec(),
            schema: self.schema.clone(),
            records: self
                .records
                .iter()
                .map(|r| ObservationalTrajectory {
                    x0: r.x0.clone(),
                    steps: r.steps[..t].to_vec(),
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    /// Header line followed by one record per line.
    pub fn to_ndjson(&self) -> String {
        let header = serde_json::json!({ "header": Header { actions: self.actions.clone(), meta: self.meta.clone() } });
        let mut out = header.to_string();
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_ndjson().as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of [`to_ndjson`](Self::to_ndjson).
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_ndjson().as_bytes()))
    }

    pub fn parse(text: &str, schema: &FeatureSchema) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing header line".into(),
        })?;
        let header: Value = serde_json::from_str(first).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        let header: Header = serde_json::from_value(header.get("header").cloned().ok_or_else(|| Error::Parse {
            line: 1,
            message: "first line must be {\"header\": ...}".into(),
        })?)
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        let mut records = Vec::new();
        for (lineno, line) in lines {
            let v: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            let r = record_from_value(&v, header.actions.len()).map_err(|message| Error::SchemaViolation {
                index: records.len(),
                message: format!("{message} (line {})", lineno + 1),
            })?;
            records.push(r);
        }
        TwinDataset::from_records(schema.clone(), header.actions, records, header.meta)
    }

    pub fn load(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, schema)
    }
}

fn check_actions(schema: &FeatureSchema, actions: &[usize]) -> Result<()> {
    if actions.len() > schema.horizon {
        return Err(Error::InvalidArgument(format!(
            "{} actions exceed horizon {}",
            actions.len(),
            schema.horizon
        )));
    }
    for (s, (&a, &c)) in actions.iter().zip(&schema.action_cardinalities).enumerate() {
        if a >= c {
            return Err(Error::InvalidArgument(format!(
                "action {a} at step {} out of range 0..{c}",
                s + 1
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GenerateOptions<'a> {
    /// Required when the twin consumes raw doses.
    pub binning: Option<&'a ActionBinning>,
    /// Drop failed sessions (recorded in the metadata) instead of aborting.
    pub allow_failures: bool,
}

/// Generates `m` twin trajectories under `actions`.
///
/// Initial states are drawn without replacement from `d`. Session `i` gets
/// seed `derive_seed(seed, i)`, so built-in twins are deterministic in
/// `(d, actions, m, seed)` regardless of the worker count.
pub fn generate_twin_dataset(
    d: &TrajectoryDataset,
    actions: &[usize],
    twin: &dyn TwinFactory,
    m: usize,
    seed: u64,
    opts: GenerateOptions<'_>,
) -> Result<TwinDataset> {
    let schema = d.schema();
    check_actions(schema, actions)?;
    if m > d.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {m} twin trajectories but only {} initial states are available",
            d.len()
        )));
    }
    let raw: Option<Vec<Vec<f64>>> = if twin.consumes_raw_doses() {
        let b = opts.binning.ok_or_else(|| {
            Error::InvalidArgument("twin consumes raw doses but no action binning was supplied".into())
        })?;
        Some(actions.iter().map(|&a| b.representative_doses(a)).collect())
    } else {
        None
    };
    let x0_indices: Vec<usize> = rand::seq::index::sample(&mut seed::rng(seed), d.len(), m).into_vec();

    let results: Mutex<Vec<Option<std::result::Result<Vec<Vec<f64>>, TwinError>>>> = Mutex::new(vec![None; m]);
    let next = AtomicUsize::new(0);
    let workers = twin.workers().max(1).min(m.max(1));
    let open_error: Mutex<Option<TwinError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut session = match twin.open_worker() {
                    Ok(s) => s,
                    Err(e) => {
                        open_error.lock().unwrap().get_or_insert(e);
                        return;
                    }
                };
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= m {
                        break;
                    }
                    let x0 = &d.records()[x0_indices[i]].x0;
                    let out = run_session(session.as_mut(), schema, x0, actions, raw.as_deref(), seed::derive_seed(seed, i as u64));
                    results.lock().unwrap()[i] = Some(out);
                }
            });
        }
    });
    if let Some(e) = open_error.into_inner().unwrap() {
        if results.lock().unwrap().iter().any(Option::is_none) {
            return Err(e.into());
        }
    }

    let mut records = Vec::with_capacity(m);
    let mut failures = Vec::new();
    for (i, r) in results.into_inner().unwrap().into_iter().enumerate() {
        match r.expect("every session index is claimed") {
            Ok(xs) => records.push(ObservationalTrajectory {
                x0: d.records()[x0_indices[i]].x0.clone(),
                steps: actions.iter().zip(xs).map(|(&a, x)| Step { a, x }).collect(),
            }),
            Err(e) if opts.allow_failures => failures.push((i, e.to_string())),
            Err(e) => {
                return Err(TwinError::SessionFailed {
                    index: i,
                    source: Box::new(e),
                }
                .into())
            }
        }
    }
    Ok(TwinDataset {
        actions: actions.to_vec(),
        schema: schema.clone(),
        records,
        meta: TwinMeta {
            twin_id: twin.twin_id(),
            seed,
            x0_indices,
            failures,
        },
    })
}

fn run_session(
    session: &mut dyn TwinSession,
    schema: &FeatureSchema,
    x0: &[f64],
    actions: &[usize],
    raw: Option<&[Vec<f64>]>,
    seed: u64,
) -> std::result::Result<Vec<Vec<f64>>, TwinError> {
    let run = |session: &mut dyn TwinSession| {
        session.begin(seed)?;
        session.init(x0)?;
        let mut xs = Vec::with_capacity(actions.len());
        for (s, &a) in actions.iter().enumerate() {
            let x = session.step(a, raw.map(|r| r[s].as_slice()))?;
            if x.len() != schema.step_features.len() {
                return Err(TwinError::LengthMismatch {
                    expected: schema.step_features.len(),
                    found: x.len(),
                });
            }
            if let Some(v) = x.iter().find(|v| !v.is_finite()) {
                return Err(TwinError::Protocol(format!("non-finite observation {v}")));
            }
            xs.push(x);
        }
        session.reset()?;
        Ok(xs)
    };
    let out = run(session);
    if out.is_err() {
        // Leave the worker clean for the next trajectory; a broken external
        // process restarts lazily on its next exchange.
        let _ = session.reset();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Feature;

    /// Deterministic twin: x_s = x0[0] + s + a, or failure on a chosen session seed.
    struct Counter {
        fail_on: Option<u64>,
        seed: u64,
        x0: f64,
        s: usize,
    }

    impl TwinSession for Counter {
        fn begin(&mut self, seed: u64) -> std::result::Result<(), TwinError> {
            self.seed = seed;
            Ok(())
        }
        fn init(&mut self, x0: &[f64]) -> std::result::Result<(), TwinError> {
            if Some(self.seed) == self.fail_on {
                return Err(TwinError::Remote("boom".into()));
            }
            self.x0 = x0[0];
            self.s = 0;
            Ok(())
        }
        fn step(&mut self, a: usize, _raw: Option<&[f64]>) -> std::result::Result<Vec<f64>, TwinError> {
            self.s += 1;
            Ok(vec![self.x0 + self.s as f64 + a as f64])
        }
        fn reset(&mut self) -> std::result::Result<(), TwinError> {
            Ok(())
        }
    }

    struct CounterFactory {
        workers: usize,
        fail_on: Option<u64>,
    }

    impl TwinFactory for CounterFactory {
        fn twin_id(&self) -> String {
            "counter".into()
        }
        fn workers(&self) -> usize {
            self.workers
        }
        fn open_worker(&self) -> std::result::Result<Box<dyn TwinSession>, TwinError> {
            Ok(Box::new(Counter { fail_on: self.fail_on, seed: 0, x0: 0.0, s: 0 }))
        }
    }

    fn data(n: usize) -> TrajectoryDataset {
        let schema = FeatureSchema::new(2, vec![Feature::continuous("id")], vec![Feature::continuous("y")], vec![2, 2]).unwrap();
        let records = (0..n)
            .map(|i| ObservationalTrajectory {
                x0: vec![i as f64 * 100.0],
                steps: vec![Step { a: 0, x: vec![0.0] }, Step { a: 1, x: vec![0.0] }],
            })
            .collect();
        TrajectoryDataset::new(schema, records, "ids").unwrap()
    }

    #[test]
    fn sizes_and_guards() {
        let d = data(5);
        let f = CounterFactory { workers: 3, fail_on: None };
        let empty = generate_twin_dataset(&d, &[1, 0], &f, 0, 1, Default::default()).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.actions, vec![1, 0]);
        assert!(generate_twin_dataset(&d, &[1, 0], &f, 6, 1, Default::default()).is_err());
        assert!(generate_twin_dataset(&d, &[2], &f, 1, 1, Default::default()).is_err());

        let all = generate_twin_dataset(&d, &[1, 0], &f, 5, 1, Default::default()).unwrap();
        let mut used: Vec<usize> = all.meta.x0_indices.clone();
        used.sort();
        assert_eq!(used, vec![0, 1, 2, 3, 4]);
        for r in &all.records {
            assert_eq!(r.steps[0].x[0], r.x0[0] + 2.0);
            assert_eq!(r.steps[1].x[0], r.x0[0] + 2.0);
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let d = data(20);
        let one = generate_twin_dataset(&d, &[1], &CounterFactory { workers: 1, fail_on: None }, 15, 9, Default::default()).unwrap();
        let many = generate_twin_dataset(&d, &[1], &CounterFactory { workers: 7, fail_on: None }, 15, 9, Default::default()).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn failures_name_the_session() {
        let d = data(4);
        let bad = seed::derive_seed(3, 2);
        let f = CounterFactory { workers: 2, fail_on: Some(bad) };
        match generate_twin_dataset(&d, &[0], &f, 4, 3, Default::default()) {
            Err(Error::Twin(TwinError::SessionFailed { index, .. })) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        let opts = GenerateOptions { allow_failures: true, ..Default::default() };
        let ok = generate_twin_dataset(&d, &[0], &f, 4, 3, opts).unwrap();
        assert_eq!(ok.len(), 3);
        assert_eq!(ok.meta.failures.len(), 1);
        assert_eq!(ok.meta.failures[0].0, 2);
    }

    #[test]
    fn file_round_trip_and_prefix() {
        let d = data(3);
        let tw = generate_twin_dataset(&d, &[1, 0], &CounterFactory { workers: 1, fail_on: None }, 3, 4, Default::default()).unwrap();
        let text = tw.to_ndjson();
        assert!(text.starts_with("{\"header\":"));
        let back = TwinDataset::parse(&text, d.schema()).unwrap();
        assert_eq!(back, tw);
        assert_eq!(back.to_ndjson(), text);
        let p = tw.prefix(1);
        assert_eq!(p.actions, vec![1]);
        assert!(p.records.iter().all(|r| r.steps.len() == 1));
    }
}
