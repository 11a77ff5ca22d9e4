//! The brake-pad walkthrough: sample data, write it out, read it back, and
//! assess three built-in twins against it.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{
    run_assessment, write_report, AssessmentConfig, AssessmentReport, DataSource, HypothesisSource, LongitudinalRequest,
    QuantityRow, Stage, StageFailure, TwinSource,
};
use crate::error::{Error, Result};
use crate::hypothesis::{save_hypotheses, HypothesisSpec, OutcomeSpec, RegionPredicate};
use crate::testing::{Method, TestConfig};
use crate::twin::TwinMode;
use crate::worlds::{resolve_world, sample_observational, DiscreteWorld};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    pub world: String,
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub fwer: f64,
    pub shift: f64,
    /// When set, every input and artifact is written below this directory
    /// and the data are re-read from disk.
    pub out_dir: Option<PathBuf>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            world: "brake-pad".into(),
            n: 5000,
            seed: 7,
            method: Method::Hoeffding,
            fwer: 0.05,
            shift: -0.6,
            out_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoRun {
    pub twin: String,
    pub report: AssessmentReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub config: DemoConfig,
    pub runs: Vec<DemoRun>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    twin: &'a str,
    quantity: &'a str,
    hypotheses: usize,
    rejections: usize,
    rejections_lo: usize,
    rejections_up: usize,
    skipped: usize,
}

impl<'a> SummaryRow<'a> {
    fn new(twin: &'a str, r: &'a QuantityRow) -> Self {
        SummaryRow {
            twin,
            quantity: &r.quantity,
            hypotheses: r.hypotheses,
            rejections: r.rejections,
            rejections_lo: r.rejections_lo,
            rejections_up: r.rejections_up,
            skipped: r.skipped,
        }
    }
}

impl DemoReport {
    pub fn run(&self, twin: &str) -> Option<&AssessmentReport> {
        self.runs.iter().find(|r| r.twin == twin).map(|r| &r.report)
    }
}

/// One whole-space spec per full action sequence, with the outcome range
/// taken from the world's last-step values.
fn demo_specs(w: &DiscreteWorld) -> Result<Vec<HypothesisSpec>> {
    let t = w.horizon;
    let col = w.schema.feature_index(t, &w.outcome_feature)?;
    let values = w.step_spaces[t - 1].iter().map(|x| x[col]);
    let (lo, up) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let total: usize = w.action_cardinalities.iter().product();
    Ok((0..total)
        .map(|mut k| {
            let mut actions = vec![0; t];
            for (s, a) in actions.iter_mut().enumerate().rev() {
                *a = k % w.action_cardinalities[s];
                k /= w.action_cardinalities[s];
            }
            let tag: Vec<String> = actions.iter().map(usize::to_string).collect();
            HypothesisSpec {
                id: format!("{}-a{}", w.outcome_feature, tag.join(".")),
                label: format!("{} under actions {}", w.outcome_feature, tag.join(",")),
                t,
                actions,
                region: RegionPredicate::whole_space(t),
                outcome: OutcomeSpec {
                    t,
                    feature: w.outcome_feature.clone(),
                    y_lo: lo,
                    y_up: up,
                },
            }
        })
        .collect())
}

fn io_stage(e: Error, stage: Stage) -> StageFailure {
    StageFailure {
        stage,
        error: e,
        partial: Box::default(),
    }
}

/// Runs the correct, propensity-blind and shifted twins on one sample.
pub fn run_demo(cfg: &DemoConfig) -> std::result::Result<DemoReport, StageFailure> {
    let world = resolve_world(&cfg.world).map_err(|e| io_stage(e, Stage::Ingest))?;
    let specs = demo_specs(&world).map_err(|e| io_stage(e, Stage::Hypotheses))?;
    let data_source = DataSource::World {
        world: cfg.world.clone(),
        n: cfg.n,
        seed: cfg.seed,
    };
    let (data, hypotheses) = match &cfg.out_dir {
        None => (data_source, HypothesisSource::Inline { specs: specs.clone() }),
        Some(dir) => {
            let write = || -> Result<(DataSource, HypothesisSource)> {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let schema = dir.join("schema.json");
                fs::write(&schema, world.schema.to_json_pretty() + "\n").map_err(|e| Error::io(&schema, e))?;
                let trajectories = dir.join("trajectories.ndjson");
                sample_observational(&world, cfg.n, cfg.seed).save(&trajectories)?;
                let path = dir.join("hypotheses.json");
                save_hypotheses(&path, &specs)?;
                world.save(dir.join("world.json"))?;
                Ok((DataSource::Files { schema, trajectories }, HypothesisSource::File { path }))
            };
            write().map_err(|e| io_stage(e, Stage::Ingest))?
        }
    };

    let modes = [TwinMode::Correct, TwinMode::PropensityBlind, TwinMode::Shifted(cfg.shift)];
    let last_action = world.action_cardinalities[world.horizon - 1] - 1;
    let mut runs = Vec::new();
    for mode in modes {
        let mut c = AssessmentConfig::new(
            data.clone(),
            hypotheses.clone(),
            TwinSource::World {
                world: cfg.world.clone(),
                mode,
                workers: 1,
            },
        );
        c.test = TestConfig {
            method: cfg.method,
            seed: cfg.seed,
            ..TestConfig::default()
        };
        c.fwer = cfg.fwer;
        c.twin_seed = cfg.seed.wrapping_add(1);
        c.histograms.include_unrejected = true;
        c.longitudinal = Some(LongitudinalRequest {
            actions: vec![last_action; world.horizon],
            region: RegionPredicate::whole_space(world.horizon),
            feature: world.outcome_feature.clone(),
            y_lo: specs[0].outcome.y_lo,
            y_up: specs[0].outcome.y_up,
        });
        let report = run_assessment(&c)?;
        if let Some(dir) = &cfg.out_dir {
            write_report(&report, dir.join(mode.label())).map_err(|e| io_stage(e, Stage::Report))?;
        }
        runs.push(DemoRun { twin: mode.label(), report });
    }
    let out = DemoReport { config: cfg.clone(), runs };
    if let Some(dir) = &cfg.out_dir {
        let summary = || -> Result<()> {
            let path = dir.join("summary.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
            for r in &out.runs {
                for row in r.report.table.iter().chain([&r.report.totals]) {
                    w.serialize(SummaryRow::new(&r.twin, row))
                        .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
                }
            }
            w.flush().map_err(|e| Error::io(&path, e))
        };
        summary().map_err(|e| io_stage(e, Stage::Report))?;
    }
    Ok(out)
}
