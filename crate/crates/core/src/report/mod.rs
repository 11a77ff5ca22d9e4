//! End-to-end assessment runs.
//!
//! [`prepare`] loads the data, obtains hypotheses and generates twin data;
//! [`PreparedAssessment::evaluate`] tests every hypothesis, applies Holm's
//! procedure and assembles an [`AssessmentReport`]. Keeping the two apart
//! lets [`sensitivity_sweep`] retest with altered outcome intervals without
//! regenerating twin data.
//!
//! Reports contain no timestamps or hash-ordered maps, so identical
//! configurations give byte-identical JSON.

mod demo;
mod diagnostics;
mod longitudinal;
mod output;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use demo::{run_demo, DemoConfig, DemoReport, DemoRun};
pub use diagnostics::{histogram, Histogram, HistogramBin, HistogramConfig};
pub use longitudinal::{longitudinal_comparison, LongitudinalPoint, LongitudinalRequest, LONGITUDINAL_LEVEL};
pub use output::{write_report, write_sweep};
pub use sweep::{sensitivity_sweep, widen_interval, SweepRow};

use crate::bounds::{collect_observational, collect_twin};
use crate::error::{Error, Result};
use crate::hypothesis::{generate_hypotheses, load_hypotheses, GenerationConfig, HypothesisSpec};
use crate::seed::{derive_seed, stable_hash};
use crate::testing::{holm_bonferroni, test_samples, Method, Side, TestConfig, TestOutcome};
use crate::trajectory::{load_dataset, split_dataset, ActionBinning, FeatureSchema, TrajectoryDataset};
use crate::twin::{generate_twin_dataset, ExternalTwin, ExternalTwinConfig, GenerateOptions, TwinDataset, TwinFactory, TwinMode, WorldTwin};
use crate::worlds::{resolve_world, sample_observational};

// ── configuration ────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    /// A schema file and a newline-delimited trajectory file.
    Files { schema: PathBuf, trajectories: PathBuf },
    /// `n` trajectories sampled from a fixture or a world file.
    World { world: String, n: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HypothesisSource {
    /// Specs tested against the whole dataset.
    File { path: PathBuf },
    Inline { specs: Vec<HypothesisSpec> },
    /// Specs generated from a held-out part of the data; the rest is tested.
    Generate {
        #[serde(flatten)]
        config: GenerationConfig,
        #[serde(default = "half")]
        held_out_fraction: f64,
        #[serde(default)]
        split_seed: u64,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TwinSource {
    World {
        world: String,
        mode: TwinMode,
        #[serde(default = "one")]
        workers: usize,
    },
    External(ExternalTwinConfig),
    /// Pre-generated twin datasets, matched to specs by action tag.
    Files { paths: Vec<PathBuf> },
}

fn one() -> usize {
    1
}

impl DataSource {
    pub fn load(&self) -> Result<TrajectoryDataset> {
        match self {
            DataSource::Files { schema, trajectories } => load_dataset(trajectories, &FeatureSchema::load(schema)?),
            DataSource::World { world, n, seed } => Ok(sample_observational(&resolve_world(world)?, *n, *seed)),
        }
    }
}

impl TwinSource {
    /// The session factory, or `None` for pre-generated files.
    pub fn factory(&self) -> Result<Option<Box<dyn TwinFactory>>> {
        Ok(match self {
            TwinSource::World { world, mode, workers } => {
                Some(Box::new(WorldTwin::new(resolve_world(world)?, *mode).with_workers(*workers)))
            }
            TwinSource::External(cfg) => Some(Box::new(ExternalTwin::new(cfg.clone()))),
            TwinSource::Files { .. } => None,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolmScope {
    /// One family containing both sides of every tested spec.
    #[default]
    Joint,
    /// One family per outcome quantity.
    PerQuantity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentConfig {
    pub data: DataSource,
    pub hypotheses: HypothesisSource,
    pub twin: TwinSource,
    /// Raw-dose binning, needed by twins that consume doses.
    #[serde(default)]
    pub binning: Option<PathBuf>,
    /// Twin trajectories per action sequence; defaults to the test-set size.
    #[serde(default)]
    pub twin_samples: Option<usize>,
    #[serde(default)]
    pub twin_seed: u64,
    #[serde(default)]
    pub allow_twin_failures: bool,
    #[serde(default)]
    pub test: TestConfig,
    #[serde(default = "default_fwer")]
    pub fwer: f64,
    #[serde(default)]
    pub holm_scope: HolmScope,
    #[serde(default)]
    pub histograms: HistogramConfig,
    #[serde(default)]
    pub longitudinal: Option<LongitudinalRequest>,
}

fn default_fwer() -> f64 {
    0.05
}

impl AssessmentConfig {
    pub fn new(data: DataSource, hypotheses: HypothesisSource, twin: TwinSource) -> Self {
        AssessmentConfig {
            data,
            hypotheses,
            twin,
            binning: None,
            twin_samples: None,
            twin_seed: 0,
            allow_twin_failures: false,
            test: TestConfig::default(),
            fwer: default_fwer(),
            holm_scope: HolmScope::Joint,
            histograms: HistogramConfig::default(),
            longitudinal: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

// ── report types ─────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Hypotheses,
    TwinData,
    Test,
    Multiplicity,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Hypotheses => "hypotheses",
            Stage::TwinData => "twin-data",
            Stage::Test => "test",
            Stage::Multiplicity => "multiplicity",
            Stage::Report => "report",
        })
    }
}

/// A stage error together with everything completed before it.
#[derive(Debug, Error)]
#[error("stage `{stage}` failed: {error}")]
pub struct StageFailure {
    pub stage: Stage,
    #[source]
    pub error: Error,
    pub partial: Box<AssessmentReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwinDataRecord {
    pub actions: Vec<usize>,
    pub twin_id: String,
    pub seed: u64,
    pub records: usize,
    pub failures: usize,
    pub digest: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub method: Method,
    pub alpha: f64,
    pub fwer: f64,
    pub holm_scope: HolmScope,
    pub bootstrap_samples: usize,
    pub min_bootstrap_n: usize,
    pub test_seed: u64,
    pub twin_seed: u64,
    pub data_seed: Option<u64>,
    pub split_seed: Option<u64>,
    pub data_digest: String,
    pub generation_digest: Option<String>,
    pub test_digest: String,
    pub n_total: usize,
    pub n_generation: usize,
    pub n_test: usize,
    pub spec_count: usize,
    pub twin_data: Vec<TwinDataRecord>,
}

impl RunMetadata {
    pub fn from_test_config(cfg: &TestConfig, fwer: f64, scope: HolmScope) -> Self {
        RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            method: cfg.method,
            alpha: cfg.alpha,
            fwer,
            holm_scope: scope,
            bootstrap_samples: cfg.bootstrap_samples,
            min_bootstrap_n: cfg.min_bootstrap_n,
            test_seed: cfg.seed,
            ..RunMetadata::default()
        }
    }
}

/// One tested or skipped spec with its multiplicity-adjusted decisions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessedHypothesis {
    pub outcome: TestOutcome,
    pub holm_reject_lo: bool,
    pub holm_reject_up: bool,
}

impl AssessedHypothesis {
    pub fn rejected(&self) -> bool {
        self.holm_reject_lo || self.holm_reject_up
    }
}

/// Per-quantity counts. `hypotheses` counts tested specs; `rejections`
/// counts specs with at least one side rejected.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantityRow {
    pub quantity: String,
    pub hypotheses: usize,
    pub rejections: usize,
    pub rejections_lo: usize,
    pub rejections_up: usize,
    pub skipped: usize,
}

/// p-values of tested specs for one quantity and side, in spec-id order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueSeries {
    pub quantity: String,
    pub side: Side,
    pub spec_ids: Vec<String>,
    pub p: Vec<f64>,
    pub neg_log10_p: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub metadata: RunMetadata,
    /// Ordered by spec id.
    pub hypotheses: Vec<AssessedHypothesis>,
    pub table: Vec<QuantityRow>,
    pub totals: QuantityRow,
    pub p_values: Vec<PValueSeries>,
    pub histograms: Vec<Histogram>,
    pub longitudinal: Vec<LongitudinalPoint>,
    pub completed_stages: Vec<Stage>,
}

impl AssessmentReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn rejected_ids(&self) -> Vec<&str> {
        self.hypotheses
            .iter()
            .filter(|h| h.rejected())
            .map(|h| h.outcome.spec_id.as_str())
            .collect()
    }

    pub fn rejections(&self) -> usize {
        self.totals.rejections
    }
}

// ── pipeline ─────────────────────────────────────────────────────────────

/// Data, hypotheses and twin data, ready for testing.
#[derive(Clone, Debug)]
pub struct PreparedAssessment {
    pub config: AssessmentConfig,
    pub metadata: RunMetadata,
    pub test_data: TrajectoryDataset,
    /// Sorted by id; ids are unique.
    pub specs: Vec<HypothesisSpec>,
    pub twins: BTreeMap<Vec<usize>, TwinDataset>,
}

fn fail(stage: Stage, error: Error, meta: &RunMetadata, done: &[Stage]) -> StageFailure {
    StageFailure {
        stage,
        error,
        partial: Box::new(AssessmentReport {
            metadata: meta.clone(),
            completed_stages: done.to_vec(),
            ..AssessmentReport::default()
        }),
    }
}

fn ingest(data: &DataSource) -> Result<(TrajectoryDataset, Option<u64>)> {
    let seed = match data {
        DataSource::Files { .. } => None,
        DataSource::World { seed, .. } => Some(*seed),
    };
    Ok((data.load()?, seed))
}

fn obtain_hypotheses(
    source: &HypothesisSource,
    data: TrajectoryDataset,
    meta: &mut RunMetadata,
) -> Result<(Vec<HypothesisSpec>, TrajectoryDataset)> {
    let (mut specs, test_data) = match source {
        HypothesisSource::File { path } => (load_hypotheses(path)?, data),
        HypothesisSource::Inline { specs } => (specs.clone(), data),
        HypothesisSource::Generate { config, held_out_fraction, split_seed } => {
            let (d0, d1) = split_dataset(&data, *held_out_fraction, *split_seed)?;
            meta.split_seed = Some(*split_seed);
            meta.generation_digest = Some(d0.digest());
            meta.n_generation = d0.len();
            (generate_hypotheses(&d0, config)?, d1)
        }
    };
    specs.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = specs.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::InvalidHypothesis(format!("duplicate spec id `{}`", w[0].id)));
    }
    for s in &specs {
        s.compile(test_data.schema())?;
    }
    Ok((specs, test_data))
}

fn twin_data(
    cfg: &AssessmentConfig,
    test_data: &TrajectoryDataset,
    needed: &BTreeSet<Vec<usize>>,
) -> Result<BTreeMap<Vec<usize>, TwinDataset>> {
    let mut out = BTreeMap::new();
    if let TwinSource::Files { paths } = &cfg.twin {
        for p in paths {
            let d = TwinDataset::load(p, test_data.schema())?;
            if out.contains_key(&d.actions) {
                return Err(Error::InvalidArgument(format!("two twin datasets are tagged with actions {:?}", d.actions)));
            }
            out.insert(d.actions.clone(), d);
        }
        if let Some(missing) = needed.iter().find(|a| !out.contains_key(*a)) {
            return Err(Error::InvalidArgument(format!("no twin dataset is tagged with actions {missing:?}")));
        }
        return Ok(out);
    }
    let factory = cfg.twin.factory()?.expect("non-file twin source");
    let binning = match &cfg.binning {
        Some(p) => Some(ActionBinning::from_json_str(
            &std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        )?),
        None => None,
    };
    let m = cfg.twin_samples.unwrap_or(test_data.len());
    let opts = GenerateOptions {
        binning: binning.as_ref(),
        allow_failures: cfg.allow_twin_failures,
    };
    for actions in needed {
        // Each action sequence draws its own initial states.
        let seed = derive_seed(cfg.twin_seed, stable_hash(&format!("{actions:?}")));
        out.insert(
            actions.clone(),
            generate_twin_dataset(test_data, actions, factory.as_ref(), m, seed, opts)?,
        );
    }
    Ok(out)
}

/// Runs every stage up to and including twin-data generation.
pub fn prepare(config: &AssessmentConfig) -> std::result::Result<PreparedAssessment, StageFailure> {
    let mut meta = RunMetadata::from_test_config(&config.test, config.fwer, config.holm_scope);
    meta.twin_seed = config.twin_seed;
    let mut done = Vec::new();

    let (data, data_seed) = ingest(&config.data).map_err(|e| fail(Stage::Ingest, e, &meta, &done))?;
    meta.data_seed = data_seed;
    meta.data_digest = data.digest();
    meta.n_total = data.len();
    done.push(Stage::Ingest);

    let (specs, test_data) =
        obtain_hypotheses(&config.hypotheses, data, &mut meta).map_err(|e| fail(Stage::Hypotheses, e, &meta, &done))?;
    meta.test_digest = test_data.digest();
    meta.n_test = test_data.len();
    meta.spec_count = specs.len();
    done.push(Stage::Hypotheses);

    let mut needed: BTreeSet<Vec<usize>> = specs.iter().map(|s| s.actions.clone()).collect();
    if let Some(l) = &config.longitudinal {
        needed.insert(l.actions.clone());
    }
    let twins = twin_data(config, &test_data, &needed).map_err(|e| fail(Stage::TwinData, e, &meta, &done))?;
    meta.twin_data = twins
        .values()
        .map(|d| TwinDataRecord {
            actions: d.actions.clone(),
            twin_id: d.meta.twin_id.clone(),
            seed: d.meta.seed,
            records: d.len(),
            failures: d.meta.failures.len(),
            digest: d.digest(),
        })
        .collect();

    Ok(PreparedAssessment {
        config: config.clone(),
        metadata: meta,
        test_data,
        specs,
        twins,
    })
}

impl PreparedAssessment {
    /// Tests `specs` (in parallel, results in input order).
    pub fn test_specs(&self, specs: &[HypothesisSpec]) -> Result<Vec<TestOutcome>> {
        specs
            .par_iter()
            .map(|spec| {
                let c = spec.compile(self.test_data.schema())?;
                let twin = self.twins.get(&spec.actions).ok_or_else(|| {
                    Error::InvalidArgument(format!("no twin data for actions {:?}", spec.actions))
                })?;
                let obs = collect_observational(&self.test_data, &c);
                let tw = collect_twin(twin, &c)?;
                Ok(test_samples(&obs, &tw, &c, &self.config.test))
            })
            .collect()
    }

    /// Tests the prepared specs and assembles the report.
    pub fn evaluate(&self) -> std::result::Result<AssessmentReport, StageFailure> {
        let mut done = vec![Stage::Ingest, Stage::Hypotheses, Stage::TwinData];
        let outcomes = self
            .test_specs(&self.specs)
            .map_err(|e| fail(Stage::Test, e, &self.metadata, &done))?;
        done.push(Stage::Test);
        let mut report = assemble_report(self.metadata.clone(), outcomes, self.config.fwer, self.config.holm_scope);
        done.push(Stage::Multiplicity);

        let h = &self.config.histograms;
        let chosen: Vec<&AssessedHypothesis> = report
            .hypotheses
            .iter()
            .filter(|a| a.outcome.is_tested() && (a.rejected() || h.include_unrejected))
            .take(h.max_specs)
            .collect();
        let mut histograms = Vec::with_capacity(chosen.len());
        for a in chosen {
            let spec = &self.specs[self.specs.binary_search_by(|s| s.id.cmp(&a.outcome.spec_id)).expect("spec present")];
            let c = spec.compile(self.test_data.schema()).expect("compiled before");
            let obs = collect_observational(&self.test_data, &c);
            let tw = collect_twin(&self.twins[&spec.actions], &c).expect("tested before");
            histograms.push(histogram(&a.outcome, &obs.agreeing_raw, &tw.raw, h));
        }
        report.histograms = histograms;

        if let Some(req) = &self.config.longitudinal {
            let family = req
                .family()
                .iter()
                .map(|s| s.compile(self.test_data.schema()))
                .collect::<Result<Vec<_>>>()
                .and_then(|f| longitudinal_comparison(&self.test_data, &self.twins[&req.actions], &f));
            report.longitudinal = family.map_err(|e| {
                let mut f = fail(Stage::Report, e, &self.metadata, &done);
                f.partial = Box::new(AssessmentReport { completed_stages: done.clone(), ..report.clone() });
                f
            })?;
        }
        done.push(Stage::Report);
        report.completed_stages = done;
        Ok(report)
    }
}

/// Prepares and evaluates in one call.
pub fn run_assessment(config: &AssessmentConfig) -> std::result::Result<AssessmentReport, StageFailure> {
    prepare(config)?.evaluate()
}

/// Applies Holm's procedure to tested outcomes and builds the tables.
/// Skipped outcomes are listed but belong to no family.
pub fn assemble_report(metadata: RunMetadata, outcomes: Vec<TestOutcome>, fwer: f64, scope: HolmScope) -> AssessmentReport {
    let mut families: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, o) in outcomes.iter().enumerate() {
        if o.is_tested() {
            let key = match scope {
                HolmScope::Joint => "",
                HolmScope::PerQuantity => o.quantity.as_str(),
            };
            families.entry(key).or_default().push(i);
        }
    }
    let mut flags = vec![(false, false); outcomes.len()];
    for members in families.values() {
        let p: Vec<f64> = members.iter().flat_map(|&i| [outcomes[i].p_lo, outcomes[i].p_up]).collect();
        let r = holm_bonferroni(&p, fwer);
        for (k, &i) in members.iter().enumerate() {
            flags[i] = (r.rejected[2 * k], r.rejected[2 * k + 1]);
        }
    }
    let hypotheses: Vec<AssessedHypothesis> = outcomes
        .into_iter()
        .zip(flags)
        .map(|(outcome, (lo, up))| AssessedHypothesis {
            outcome,
            holm_reject_lo: lo,
            holm_reject_up: up,
        })
        .collect();

    let mut rows: BTreeMap<String, QuantityRow> = BTreeMap::new();
    let mut series: BTreeMap<String, [PValueSeries; 2]> = BTreeMap::new();
    for h in &hypotheses {
        let o = &h.outcome;
        let row = rows.entry(o.quantity.clone()).or_insert_with(|| QuantityRow {
            quantity: o.quantity.clone(),
            ..QuantityRow::default()
        });
        if !o.is_tested() {
            row.skipped += 1;
            continue;
        }
        row.hypotheses += 1;
        row.rejections += h.rejected() as usize;
        row.rejections_lo += h.holm_reject_lo as usize;
        row.rejections_up += h.holm_reject_up as usize;
        let s = series.entry(o.quantity.clone()).or_insert_with(|| {
            [Side::Lower, Side::Upper].map(|side| PValueSeries {
                quantity: o.quantity.clone(),
                side,
                spec_ids: Vec::new(),
                p: Vec::new(),
                neg_log10_p: Vec::new(),
            })
        });
        for (s, p) in s.iter_mut().zip([o.p_lo, o.p_up]) {
            s.spec_ids.push(o.spec_id.clone());
            s.p.push(p);
            s.neg_log10_p.push(-p.log10());
        }
    }
    let table: Vec<QuantityRow> = rows.into_values().collect();
    let totals = table.iter().fold(
        QuantityRow {
            quantity: "total".into(),
            ..QuantityRow::default()
        },
        |mut t, r| {
            t.hypotheses += r.hypotheses;
            t.rejections += r.rejections;
            t.rejections_lo += r.rejections_lo;
            t.rejections_up += r.rejections_up;
            t.skipped += r.skipped;
            t
        },
    );
    AssessmentReport {
        metadata,
        hypotheses,
        table,
        totals,
        p_values: series.into_values().flatten().collect(),
        histograms: Vec::new(),
        longitudinal: Vec::new(),
        completed_stages: vec![Stage::Test, Stage::Multiplicity],
    }
}
