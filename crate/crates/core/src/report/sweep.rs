use serde::{Deserialize, Serialize};

use super::{assemble_report, PreparedAssessment, Stage, StageFailure};
use crate::hypothesis::HypothesisSpec;

/// Rejection counts at one interval scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    /// Why this `δ` was not run, if it was not.
    pub skipped: Option<String>,
    pub tested: usize,
    pub rejections: usize,
    pub rejections_lo: usize,
    pub rejections_up: usize,
    pub rejected_ids: Vec<String>,
}

/// Relative width below which a scaled interval counts as a point.
pub const COLLAPSE_TOLERANCE: f64 = 1e-12;

/// `[y_lo (1 - δ/2), y_up (1 + δ/2)]`.
pub fn widen_interval(spec: &HypothesisSpec, delta: f64) -> HypothesisSpec {
    let mut s = spec.clone();
    s.outcome.y_lo = spec.outcome.y_lo * (1.0 - delta / 2.0);
    s.outcome.y_up = spec.outcome.y_up * (1.0 + delta / 2.0);
    s
}

/// Retests the prepared specs once per `δ`, reusing the twin data. A `δ`
/// that inverts or collapses the interval of any originally nondegenerate
/// spec is skipped as a whole.
pub fn sensitivity_sweep(prep: &PreparedAssessment, deltas: &[f64]) -> Result<Vec<SweepRow>, StageFailure> {
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let specs: Vec<HypothesisSpec> = prep.specs.iter().map(|s| widen_interval(s, delta)).collect();
        let slack = |lo: f64, up: f64| COLLAPSE_TOLERANCE * lo.abs().max(up.abs()).max(1.0);
        let bad = prep.specs.iter().zip(&specs).find(|(orig, new)| {
            let (lo, up) = (new.outcome.y_lo, new.outcome.y_up);
            !orig.is_degenerate() && !(up - lo > slack(lo, up))
        });
        if let Some((_, new)) = bad {
            let (lo, up) = (new.outcome.y_lo, new.outcome.y_up);
            let what = if lo - up > slack(lo, up) { "inverts" } else { "collapses" };
            rows.push(SweepRow {
                delta,
                skipped: Some(format!("delta {delta} {what} the interval of `{}`", new.id)),
                tested: 0,
                rejections: 0,
                rejections_lo: 0,
                rejections_up: 0,
                rejected_ids: Vec::new(),
            });
            continue;
        }
        let outcomes = prep.test_specs(&specs).map_err(|error| StageFailure {
            stage: Stage::Test,
            error,
            partial: Box::default(),
        })?;
        let r = assemble_report(prep.metadata.clone(), outcomes, prep.config.fwer, prep.config.holm_scope);
        rows.push(SweepRow {
            delta,
            skipped: None,
            tested: r.totals.hypotheses,
            rejections: r.totals.rejections,
            rejections_lo: r.totals.rejections_lo,
            rejections_up: r.totals.rejections_up,
            rejected_ids: r.rejected_ids().into_iter().map(String::from).collect(),
        });
    }
    Ok(rows)
}
