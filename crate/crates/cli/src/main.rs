//! `twinfalsify`: command-line front end for the assessment pipeline.
//!
//! Exit codes: 0 on success, 2 when inputs are invalid (bad flags, config,
//! schema, data or hypothesis files), 3 when a stage fails while running.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use twinfalsify::hypothesis::{generate_hypotheses, save_hypotheses, GenerationConfig, MedianMode};
use twinfalsify::report::{
    assemble_report, prepare, run_demo, sensitivity_sweep, write_report, write_sweep, AssessmentConfig,
    AssessmentReport, DataSource, DemoConfig, HolmScope, QuantityRow, RunMetadata, StageFailure, TwinSource,
};
use twinfalsify::testing::{Method, TestOutcome};
use twinfalsify::trajectory::{fit_action_binning, split_dataset, ActionBinning, TrajectoryDataset};
use twinfalsify::twin::{generate_twin_dataset, ExternalTwinConfig, GenerateOptions, TwinMode};
use twinfalsify::Error;

#[derive(Parser)]
#[command(name = "twinfalsify", version, about = "Falsify digital twins against confounded observational data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and print its summary; optionally write it back out.
    Ingest(IngestArgs),
    /// Split a dataset into a held-out part and the remainder.
    Split(SplitArgs),
    /// Fit zero/quartile dose bins on held-out data.
    BinActions(BinArgs),
    /// Generate hypothesis specs from held-out data.
    GenHypotheses(GenArgs),
    /// Generate twin trajectories for one action sequence.
    GenTwinData(TwinDataArgs),
    /// Run the pipeline up to testing and save the per-spec outcomes.
    Test(TestArgs),
    /// Apply Holm's procedure and write the report artifacts.
    Report(ReportArgs),
    /// Rerun the tests with rescaled outcome intervals.
    Sweep(SweepArgs),
    /// Run the brake-pad walkthrough with three built-in twins.
    Demo(DemoArgs),
}

// ── errors ───────────────────────────────────────────────────────────────

enum CliError {
    Invalid(String),
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() || matches!(e, Error::Io { .. }) {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Failed(e.to_string())
        }
    }
}

impl From<StageFailure> for CliError {
    fn from(f: StageFailure) -> Self {
        let msg = f.to_string();
        match CliError::from(f.error) {
            CliError::Invalid(_) => CliError::Invalid(msg),
            CliError::Failed(_) => CliError::Failed(msg),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

// ── shared arguments ─────────────────────────────────────────────────────

/// Either a schema plus trajectory file, or a built-in/world-file sample.
#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long, requires = "trajectories", conflicts_with = "world")]
    schema: Option<PathBuf>,
    #[arg(long, requires = "schema")]
    trajectories: Option<PathBuf>,
    /// Built-in world name or world JSON file to sample from.
    #[arg(long)]
    world: Option<String>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl DataArgs {
    fn source(&self) -> CliResult<DataSource> {
        match (&self.schema, &self.trajectories, &self.world) {
            (Some(schema), Some(trajectories), None) => Ok(DataSource::Files {
                schema: schema.clone(),
                trajectories: trajectories.clone(),
            }),
            (None, None, Some(world)) => Ok(DataSource::World {
                world: world.clone(),
                n: self.n,
                seed: self.data_seed,
            }),
            _ => Err(invalid("give either --schema and --trajectories, or --world")),
        }
    }

    fn load(&self) -> CliResult<TrajectoryDataset> {
        Ok(self.source()?.load()?)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::Failed(Error::io(path, e).to_string()))
}

/// `println!` that ignores a closed stdout (for example `| head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn print_json<T: Serialize>(value: &T) {
    say!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

/// Settings shared by `test`, `report` and `sweep`. The config file is read
/// first; every flag given here overrides it.
#[derive(Args, Clone)]
struct PipelineArgs {
    /// Assessment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    fwer: Option<f64>,
    #[arg(long, value_parser = parse_scope)]
    holm_scope: Option<HolmScope>,
    #[arg(long)]
    bootstrap_samples: Option<usize>,
    #[arg(long)]
    min_bootstrap_n: Option<usize>,
    #[arg(long)]
    test_seed: Option<u64>,
    #[arg(long)]
    twin_seed: Option<u64>,
    #[arg(long)]
    twin_samples: Option<usize>,
    #[arg(long)]
    allow_twin_failures: bool,
    #[arg(long)]
    histogram_bins: Option<usize>,
    /// Histograms over the full value range instead of the central 95%.
    #[arg(long)]
    untruncated: bool,
    /// Histograms for unrejected specs too.
    #[arg(long)]
    all_histograms: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    serde_json::from_value(serde_json::Value::from(s)).map_err(|_| format!("unknown method `{s}` (hoeffding, bootstrap)"))
}

fn parse_scope(s: &str) -> Result<HolmScope, String> {
    serde_json::from_value(serde_json::Value::from(s)).map_err(|_| format!("unknown scope `{s}` (joint, per-quantity)"))
}

fn parse_mode(s: &str) -> Result<TwinMode, String> {
    s.parse::<TwinMode>().map_err(|e| e.to_string())
}

fn parse_median_mode(s: &str) -> Result<MedianMode, String> {
    serde_json::from_value(serde_json::Value::from(s)).map_err(|_| format!("unknown median mode `{s}` (per-timestep, pooled)"))
}

impl PipelineArgs {
    fn config(&self) -> CliResult<AssessmentConfig> {
        let text = fs::read_to_string(&self.config).map_err(|e| Error::io(&self.config, e))?;
        let mut c = AssessmentConfig::from_json_str(&text).map_err(|e| invalid(format!("{}: {e}", self.config.display())))?;
        let t = &mut c.test;
        if let Some(v) = self.method {
            t.method = v;
        }
        if let Some(v) = self.alpha {
            t.alpha = v;
        }
        if let Some(v) = self.bootstrap_samples {
            t.bootstrap_samples = v;
        }
        if let Some(v) = self.min_bootstrap_n {
            t.min_bootstrap_n = v;
        }
        if let Some(v) = self.test_seed {
            t.seed = v;
        }
        if let Some(v) = self.fwer {
            c.fwer = v;
        }
        if let Some(v) = self.holm_scope {
            c.holm_scope = v;
        }
        if let Some(v) = self.twin_seed {
            c.twin_seed = v;
        }
        if self.twin_samples.is_some() {
            c.twin_samples = self.twin_samples;
        }
        c.allow_twin_failures |= self.allow_twin_failures;
        if let Some(v) = self.histogram_bins {
            c.histograms.bins = v;
        }
        if self.untruncated {
            c.histograms.truncate = false;
        }
        c.histograms.include_unrejected |= self.all_histograms;
        check_levels(c.test.alpha, c.fwer)?;
        Ok(c)
    }
}

fn check_levels(alpha: f64, fwer: f64) -> CliResult {
    for (name, v) in [("alpha", alpha), ("fwer", fwer)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(invalid(format!("{name} {v} is outside (0, 1]")));
        }
    }
    Ok(())
}

// ── ingest / split / bin-actions / gen-hypotheses ────────────────────────

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Write the validated trajectories here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the schema here.
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DatasetSummary<'a> {
    provenance: &'a str,
    records: usize,
    horizon: usize,
    x0_features: Vec<&'a str>,
    step_features: Vec<&'a str>,
    action_cardinalities: &'a [usize],
    digest: String,
}

fn summarize(d: &TrajectoryDataset) -> DatasetSummary<'_> {
    let s = d.schema();
    DatasetSummary {
        provenance: d.provenance(),
        records: d.len(),
        horizon: s.horizon,
        x0_features: s.x0_features.iter().map(|f| f.name.as_str()).collect(),
        step_features: s.step_features.iter().map(|f| f.name.as_str()).collect(),
        action_cardinalities: &s.action_cardinalities,
        digest: d.digest(),
    }
}

fn ingest(a: &IngestArgs) -> CliResult {
    let d = a.data.load()?;
    if let Some(p) = &a.out {
        write_text(p, &d.to_ndjson())?;
    }
    if let Some(p) = &a.schema_out {
        write_text(p, &(d.schema().to_json_pretty() + "\n"))?;
    }
    print_json(&summarize(&d));
    Ok(())
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Fraction of records held out for hypothesis generation.
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    held_out: PathBuf,
    #[arg(long)]
    main: PathBuf,
}

fn split(a: &SplitArgs) -> CliResult {
    let d = a.data.load()?;
    let (d0, d1) = split_dataset(&d, a.fraction, a.seed)?;
    write_text(&a.held_out, &d0.to_ndjson())?;
    write_text(&a.main, &d1.to_ndjson())?;
    print_json(&serde_json::json!({
        "held_out": { "records": d0.len(), "digest": d0.digest() },
        "main": { "records": d1.len(), "digest": d1.digest() },
    }));
    Ok(())
}

#[derive(Args)]
struct BinArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Raw dose step features, one bin dimension each.
    #[arg(long, value_delimiter = ',', required = true)]
    columns: Vec<String>,
    /// Binning JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the dataset with re-derived actions here.
    #[arg(long, requires = "binned_schema")]
    binned: Option<PathBuf>,
    #[arg(long, requires = "binned")]
    binned_schema: Option<PathBuf>,
}

fn bin_actions(a: &BinArgs) -> CliResult {
    let d = a.data.load()?;
    let cols: Vec<&str> = a.columns.iter().map(String::as_str).collect();
    let b = fit_action_binning(&d, &cols)?;
    write_text(&a.out, &(b.to_json_pretty() + "\n"))?;
    if let (Some(out), Some(schema_out)) = (&a.binned, &a.binned_schema) {
        let binned = b.apply(&d)?;
        write_text(out, &binned.to_ndjson())?;
        write_text(schema_out, &(binned.schema().to_json_pretty() + "\n"))?;
    }
    let reps: Vec<Vec<f64>> = (0..b.cardinality()).map(|k| b.representative_doses(k)).collect();
    print_json(&serde_json::json!({ "actions": b.cardinality(), "representative_doses": reps }));
    Ok(())
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Outcome quantities; repeat or separate with commas.
    #[arg(long = "quantity", value_delimiter = ',', required = true)]
    quantities: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    q_lo: f64,
    #[arg(long, default_value_t = 0.8)]
    q_up: f64,
    #[arg(long)]
    sex_feature: Option<String>,
    #[arg(long)]
    age_feature: Option<String>,
    #[arg(long, value_parser = parse_median_mode, default_value = "per-timestep")]
    median_mode: MedianMode,
    #[arg(long)]
    out: PathBuf,
}

fn gen_hypotheses(a: &GenArgs) -> CliResult {
    let d = a.data.load()?;
    let cfg = GenerationConfig {
        quantities: a.quantities.clone(),
        q_lo: a.q_lo,
        q_up: a.q_up,
        sex_feature: a.sex_feature.clone(),
        age_feature: a.age_feature.clone(),
        median_mode: a.median_mode,
    };
    let specs = generate_hypotheses(&d, &cfg)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_hypotheses(&a.out, &specs)?;
    print_json(&serde_json::json!({ "specs": specs.len(), "degenerate": specs.iter().filter(|s| s.is_degenerate()).count() }));
    Ok(())
}

// ── gen-twin-data ────────────────────────────────────────────────────────

#[derive(Args)]
struct TwinDataArgs {
    /// Initial states are drawn from this dataset.
    #[command(flatten)]
    data: DataArgs,
    /// Action indices, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    actions: Vec<usize>,
    /// Built-in twin: world name or world file.
    #[arg(long, conflicts_with = "external")]
    twin_world: Option<String>,
    /// correct, propensity-blind or shifted:<delta>.
    #[arg(long, value_parser = parse_mode, default_value = "correct")]
    mode: TwinMode,
    /// External twin program.
    #[arg(long)]
    external: Option<PathBuf>,
    /// Argument passed to the external program; repeatable.
    #[arg(long = "twin-arg", allow_hyphen_values = true)]
    twin_args: Vec<String>,
    /// Seconds to wait for each reply.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    /// Send representative doses (needs --binning).
    #[arg(long)]
    raw_doses: bool,
    #[arg(long)]
    binning: Option<PathBuf>,
    /// Concurrent sessions (processes, for external twins).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Trajectories to generate; defaults to the dataset size.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop failed sessions instead of aborting.
    #[arg(long)]
    allow_failures: bool,
    #[arg(long)]
    out: PathBuf,
}

fn gen_twin_data(a: &TwinDataArgs) -> CliResult {
    let d = a.data.load()?;
    let source = match (&a.twin_world, &a.external) {
        (Some(world), None) => TwinSource::World {
            world: world.clone(),
            mode: a.mode,
            workers: a.workers,
        },
        (None, Some(program)) => {
            let timeout = Duration::try_from_secs_f64(a.timeout).map_err(|e| invalid(format!("--timeout: {e}")))?;
            TwinSource::External(ExternalTwinConfig {
                program: program.clone(),
                args: a.twin_args.clone(),
                workers: a.workers,
                timeout,
                consumes_raw_doses: a.raw_doses,
            })
        }
        _ => return Err(invalid("give exactly one of --twin-world or --external")),
    };
    let binning = match &a.binning {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(ActionBinning::from_json_str(&text)?)
        }
        None => None,
    };
    let factory = source.factory()?.expect("not a file source");
    let opts = GenerateOptions {
        binning: binning.as_ref(),
        allow_failures: a.allow_failures,
    };
    let m = a.m.unwrap_or(d.len());
    let twin = generate_twin_dataset(&d, &a.actions, factory.as_ref(), m, a.seed, opts)?;
    write_text(&a.out, &twin.to_ndjson())?;
    print_json(&serde_json::json!({
        "actions": twin.actions,
        "records": twin.len(),
        "failures": twin.meta.failures,
        "digest": twin.digest(),
    }));
    Ok(())
}

// ── test / report / sweep ────────────────────────────────────────────────

/// The `test` artifact: everything `report` needs to apply Holm.
#[derive(Serialize, Deserialize)]
struct TestRun {
    metadata: RunMetadata,
    outcomes: Vec<TestOutcome>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Outcomes JSON.
    #[arg(long)]
    out: PathBuf,
}

fn test(a: &TestArgs) -> CliResult {
    let c = a.pipeline.config()?;
    let prep = prepare(&c)?;
    let outcomes = prep.test_specs(&prep.specs).map_err(|e| match CliError::from(e) {
        CliError::Invalid(m) | CliError::Failed(m) => CliError::Failed(format!("stage `test` failed: {m}")),
    })?;
    let tested = outcomes.iter().filter(|o| o.is_tested()).count();
    let run = TestRun { metadata: prep.metadata, outcomes };
    write_text(&a.out, &(serde_json::to_string_pretty(&run).expect("serializable") + "\n"))?;
    eprintln!("{} specs, {tested} tested", run.outcomes.len());
    Ok(())
}

#[derive(Args)]
struct ReportArgs {
    /// Outcomes written by `test`.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    outcomes: Option<PathBuf>,
    /// Assessment config (JSON); runs the whole pipeline.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fwer: Option<f64>,
    #[arg(long, value_parser = parse_scope)]
    holm_scope: Option<HolmScope>,
    #[arg(long)]
    out: PathBuf,
}

fn report(a: &ReportArgs) -> CliResult {
    let r = match (&a.outcomes, &a.config) {
        (Some(path), _) => {
            let run: TestRun = read_json(path)?;
            let fwer = a.fwer.unwrap_or(run.metadata.fwer);
            let scope = a.holm_scope.unwrap_or(run.metadata.holm_scope);
            check_levels(run.metadata.alpha, fwer)?;
            let mut meta = run.metadata;
            meta.fwer = fwer;
            meta.holm_scope = scope;
            assemble_report(meta, run.outcomes, fwer, scope)
        }
        (None, Some(config)) => {
            let p = PipelineArgs {
                config: config.clone(),
                method: None,
                alpha: None,
                fwer: a.fwer,
                holm_scope: a.holm_scope,
                bootstrap_samples: None,
                min_bootstrap_n: None,
                test_seed: None,
                twin_seed: None,
                twin_samples: None,
                allow_twin_failures: false,
                histogram_bins: None,
                untruncated: false,
                all_histograms: false,
            };
            let c = p.config()?;
            match prepare(&c).and_then(|prep| prep.evaluate()) {
                Ok(r) => r,
                Err(f) => {
                    // Keep whatever finished before the failing stage.
                    write_report(&f.partial, &a.out)?;
                    return Err(f.into());
                }
            }
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    write_report(&r, &a.out)?;
    print_table(&r);
    Ok(())
}

fn print_table(r: &AssessmentReport) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<24} {:>10} {:>10} {:>6} {:>6} {:>8}", "quantity", "hypotheses", "rejections", "lo", "up", "skipped");
    let row = |out: &mut dyn Write, q: &QuantityRow| {
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>6} {:>6} {:>8}",
            q.quantity, q.hypotheses, q.rejections, q.rejections_lo, q.rejections_up, q.skipped
        );
    };
    for q in &r.table {
        row(&mut out, q);
    }
    row(&mut out, &r.totals);
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Interval scalings, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.1,0.2,0.4,0.8")]
    deltas: Vec<f64>,
    /// CSV output; the table is printed either way.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sweep(a: &SweepArgs) -> CliResult {
    let c = a.pipeline.config()?;
    let prep = prepare(&c)?;
    let rows = sensitivity_sweep(&prep, &a.deltas)?;
    if let Some(p) = &a.out {
        write_sweep(&rows, p)?;
    }
    say!("{:>8} {:>7} {:>10}  note", "delta", "tested", "rejections");
    for r in &rows {
        say!("{:>8} {:>7} {:>10}  {}", r.delta, r.tested, r.rejections, r.skipped.as_deref().unwrap_or(""));
    }
    Ok(())
}

// ── demo ─────────────────────────────────────────────────────────────────

#[derive(Args)]
struct DemoArgs {
    /// Demo config (JSON); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fixture name or world file.
    #[arg(long)]
    world: Option<String>,
    /// Observational trajectories to sample.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `hoeffding` or `bootstrap`.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Family-wise error rate for Holm's procedure.
    #[arg(long)]
    fwer: Option<f64>,
    /// Outcome shift of the shifted twin.
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<f64>,
    /// Write inputs and artifacts below this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn demo(a: &DemoArgs) -> CliResult {
    let mut c: DemoConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => DemoConfig::default(),
    };
    if let Some(v) = &a.world {
        c.world = v.clone();
    }
    if let Some(v) = a.n {
        c.n = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.method {
        c.method = v;
    }
    if let Some(v) = a.fwer {
        c.fwer = v;
    }
    if let Some(v) = a.shift {
        c.shift = v;
    }
    if a.out.is_some() {
        c.out_dir = a.out.clone();
    }
    check_levels(0.05, c.fwer)?;
    let d = run_demo(&c)?;
    if let Some(dir) = &c.out_dir {
        write_text(&dir.join("demo.json"), &(serde_json::to_string_pretty(&d).expect("serializable") + "\n"))?;
    }
    for run in &d.runs {
        say!("twin: {}", run.twin);
        print_table(&run.report);
        for p in &run.report.longitudinal {
            if let (Some(q), Some(lo), Some(up)) = (p.q_hat, p.q_lo_bound, p.q_up_bound) {
                say!("  t={} twin mean {q:.3} vs bounds [{lo:.3}, {up:.3}]", p.t);
            }
        }
        say!();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a),
        Command::BinActions(a) => bin_actions(a),
        Command::GenHypotheses(a) => gen_hypotheses(a),
        Command::GenTwinData(a) => gen_twin_data(a),
        Command::Test(a) => test(a),
        Command::Report(a) => report(a),
        Command::Sweep(a) => sweep(a),
        Command::Demo(a) => demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
