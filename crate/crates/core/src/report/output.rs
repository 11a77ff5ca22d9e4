//! JSON and CSV artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{AssessmentReport, SweepRow};
use crate::error::{Error, Result};
use crate::testing::{Side, TestStatus};

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

#[derive(Serialize)]
struct HypothesisRow<'a> {
    spec_id: &'a str,
    quantity: &'a str,
    t: usize,
    actions: String,
    status: &'a str,
    n: usize,
    n_agree: usize,
    n_hat: usize,
    mu_lo: Option<f64>,
    mu_up: Option<f64>,
    mu_hat: Option<f64>,
    propensity_hat: Option<f64>,
    p_lo: f64,
    p_up: f64,
    holm_reject_lo: bool,
    holm_reject_up: bool,
}

#[derive(Serialize)]
struct PValueRow<'a> {
    quantity: &'a str,
    side: &'a str,
    spec_id: &'a str,
    p: f64,
    neg_log10_p: f64,
}

#[derive(Serialize)]
struct BinRow<'a> {
    spec_id: &'a str,
    lo: f64,
    hi: f64,
    observational: usize,
    twin: usize,
}

/// Writes `report.json`, `table.csv`, `hypotheses.csv`, `p_values.csv`,
/// `histograms.csv` and `longitudinal.csv` into `dir`.
pub fn write_report(report: &AssessmentReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    fs::write(&json, report.to_json_pretty()).map_err(|e| Error::io(&json, e))?;

    write_csv(&dir.join("table.csv"), report.table.iter().chain([&report.totals]))?;
    write_csv(
        &dir.join("hypotheses.csv"),
        report.hypotheses.iter().map(|h| {
            let o = &h.outcome;
            HypothesisRow {
                spec_id: &o.spec_id,
                quantity: &o.quantity,
                t: o.t,
                actions: o.actions.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                status: match o.status {
                    TestStatus::Tested => "tested",
                    TestStatus::Skipped(_) => "skipped",
                },
                n: o.n,
                n_agree: o.n_agree,
                n_hat: o.n_hat,
                mu_lo: o.observational.mu_lo,
                mu_up: o.observational.mu_up,
                mu_hat: o.twin.mu_hat,
                propensity_hat: o.observational.propensity_hat,
                p_lo: o.p_lo,
                p_up: o.p_up,
                holm_reject_lo: h.holm_reject_lo,
                holm_reject_up: h.holm_reject_up,
            }
        }),
    )?;
    write_csv(
        &dir.join("p_values.csv"),
        report.p_values.iter().flat_map(|s| {
            let side = match s.side {
                Side::Lower => "lo",
                Side::Upper => "up",
            };
            (0..s.p.len()).map(move |i| PValueRow {
                quantity: &s.quantity,
                side,
                spec_id: &s.spec_ids[i],
                p: s.p[i],
                neg_log10_p: s.neg_log10_p[i],
            })
        }),
    )?;
    write_csv(
        &dir.join("histograms.csv"),
        report.histograms.iter().flat_map(|h| {
            h.bins.iter().map(move |b| BinRow {
                spec_id: &h.spec_id,
                lo: b.lo,
                hi: b.hi,
                observational: b.observational,
                twin: b.twin,
            })
        }),
    )?;
    write_csv(&dir.join("longitudinal.csv"), &report.longitudinal)
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    delta: f64,
    skipped: Option<&'a str>,
    tested: usize,
    rejections: usize,
    rejections_lo: usize,
    rejections_up: usize,
}

pub fn write_sweep(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(
        path.as_ref(),
        rows.iter().map(|r| SweepCsvRow {
            delta: r.delta,
            skipped: r.skipped.as_deref(),
            tested: r.tested,
            rejections: r.rejections,
            rejections_lo: r.rejections_lo,
            rejections_up: r.rejections_up,
        }),
    )
}
