//! Acceptance runner: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are run at full size like the
//! rest and are expected to fail; the runner fails if any other criterion
//! fails or if one of those starts passing.


use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::Rng;
use serde_json::Value;
use twinfalsify::bounds::{collect_observational, collect_twin, summarize_observational, BoundSummary, ObservationalSamples, TwinSummary};
use twinfalsify::hypothesis::{HypothesisSpec, OutcomeSpec, RegionPredicate};
use twinfalsify::seed::rng;
use twinfalsify::testing::{
    hoeffding_decision, hoeffding_grid_p_values, holm_bonferroni, p_value_hoeffding_lo, test_samples, AlphaGrid,
    BootstrapDistribution, BootstrapVariant, Method, Side, TestConfig,
};
use twinfalsify::twin::{generate_twin_dataset, GenerateOptions, TwinMode, WorldTwin};
use twinfalsify::worlds::{
    brake_pad_world, brake_pad_world_with, exact_bounds_oracle, interventional_law, nonidentifiability_pair,
    observational_law, random_spec, random_world, sample_observational, two_step_treatment_world, DiscreteWorld,
    Law, RandomWorldConfig, AGGRESSIVE, GENTLE,
};

const KNOWN_UNATTAINABLE: [(u32, &str); 2] = [
    (
        8,
        "the propensity-blind twin samples the observational conditional law, whose mean lies inside [Q_lo, Q_up] for every world",
    ),
    (11, "same cause: no bounds test can reject the propensity-blind twin, so the demo run has no Holm rejection"),
];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn config_for(seed: u64) -> RandomWorldConfig {
    RandomWorldConfig {
        horizon: 1 + (seed % 3) as usize,
        confounders: 2 + (seed % 2) as usize,
        policy_sharpness: 1.0 + (seed % 4) as f64,
        ..RandomWorldConfig::default()
    }
}

fn random_case(seed: u64) -> (DiscreteWorld, HypothesisSpec) {
    let w = random_world(seed, &config_for(seed)).unwrap();
    let spec = random_spec(&w, seed ^ 0x5eed).unwrap();
    (w, spec)
}

fn whole_space(feature: &str, actions: Vec<usize>, y_lo: f64, y_up: f64) -> HypothesisSpec {
    let t = actions.len();
    HypothesisSpec {
        id: format!("{feature}-{actions:?}"),
        label: String::new(),
        t,
        actions,
        region: RegionPredicate::whole_space(t),
        outcome: OutcomeSpec { t, feature: feature.into(), y_lo, y_up },
    }
}

/// Target computed straight from the interventional law.
fn target(w: &DiscreteWorld, spec: &HypothesisSpec) -> f64 {
    let c = spec.compile(&w.schema).unwrap();
    let (mut mass, mut total) = (0.0, 0.0);
    for (path, p) in interventional_law(w, &spec.actions).unwrap() {
        let traj = w.trajectory(&path);
        if c.in_region(&traj, spec.t) {
            mass += p;
            total += p * c.outcome(&traj).clipped;
        }
    }
    total / mass
}

fn max_law_diff(a: &Law, b: &Law) -> f64 {
    let keys: BTreeSet<&Vec<usize>> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

fn sharpness_cases() -> Vec<(DiscreteWorld, HypothesisSpec)> {
    let mut cases = vec![(brake_pad_world(), whole_space("stopped", vec![AGGRESSIVE], 0.0, 1.0))];
    let mut seed = 500;
    while cases.len() < 11 {
        cases.push(random_case(seed));
        seed += 1;
    }
    cases
}

// ── criteria ─────────────────────────────────────────────────────────────

fn c1_oracle_sandwich() -> Verdict {
    let start = Instant::now();
    let mut violations = 0;
    for seed in 0..200 {
        let (w, spec) = random_case(seed);
        let o = exact_bounds_oracle(&w, &spec).unwrap();
        if !(o.q_lo <= o.q + 1e-12 && o.q <= o.q_up + 1e-12) {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(violations == 0 && secs < 60.0, format!("{violations} violations over 200 worlds in {secs:.2} s"))
}

fn c2_sample_population_agreement() -> Verdict {
    let start = Instant::now();
    let (mut checked, mut worst) = (0, 0.0f64);
    let mut seed = 1000;
    while checked < 20 {
        let (w, spec) = random_case(seed);
        seed += 1;
        let o = exact_bounds_oracle(&w, &spec).unwrap();
        if o.p_qualify < 0.05 {
            continue;
        }
        let d = sample_observational(&w, 50_000, seed);
        let s = summarize_observational(&d, &spec.compile(&w.schema).unwrap());
        // Y_lo and Y_up live in an interval of width R, so sd <= R/2.
        let se = (spec.outcome.y_up - spec.outcome.y_lo) / (2.0 * (s.n as f64).sqrt());
        for (est, truth) in [(s.mu_lo.unwrap(), o.q_lo), (s.mu_up.unwrap(), o.q_up)] {
            if se > 0.0 {
                worst = worst.max((est - truth).abs() / se);
            } else if est != truth {
                worst = f64::INFINITY;
            }
        }
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 3.0 && secs < 120.0, format!("largest deviation {worst:.2} SE over 20 worlds at n=50000 in {secs:.1} s"))
}

fn tightness_error(s: &BoundSummary) -> Option<f64> {
    let (lo, up, p) = (s.mu_lo?, s.mu_up?, s.propensity_hat?);
    let r = s.y_up - s.y_lo;
    (r > 0.0).then(|| ((up - lo) / r - (1.0 - p)).abs())
}

fn c3_tightness_identity() -> Verdict {
    let (mut count, mut worst) = (0, 0.0f64);
    let mut record = |s: &BoundSummary| {
        if let Some(e) = tightness_error(s) {
            count += 1;
            worst = worst.max(e);
        }
    };
    for seed in 0..200 {
        let (w, spec) = random_case(seed);
        let c = spec.compile(&w.schema).unwrap();
        for n in [1, 10, 500] {
            record(&summarize_observational(&sample_observational(&w, n, seed * 7 + n as u64), &c));
        }
    }
    let mut r = rng(33);
    for _ in 0..2000 {
        let y_lo: f64 = r.gen_range(-100.0..100.0);
        let width: f64 = r.gen_range(1e-3..50.0);
        let agreeing: Vec<f64> = (0..r.gen_range(0..40)).map(|_| y_lo + width * r.gen::<f64>()).collect();
        let s = ObservationalSamples {
            agreeing_raw: agreeing.clone(),
            agreeing,
            disagreeing: r.gen_range(0..40),
            y_lo,
            y_up: y_lo + width,
        }
        .summary();
        record(&s);
    }
    // Every summary built anywhere also passes the identity check inside
    // `summary()` itself in debug builds.
    verdict(worst <= 1e-12, format!("max error {worst:.1e} over {count} summaries"))
}

fn c4_sharpness() -> Verdict {
    let (mut law, mut attain) = (0.0f64, 0.0f64);
    for (w, spec) in sharpness_cases() {
        let o = exact_bounds_oracle(&w, &spec).unwrap();
        let (w_lo, w_up) = nonidentifiability_pair(&w, &spec).unwrap();
        let obs = observational_law(&w);
        law = law.max(max_law_diff(&obs, &observational_law(&w_lo))).max(max_law_diff(&obs, &observational_law(&w_up)));
        attain = attain.max((target(&w_lo, &spec) - o.q_lo).abs()).max((target(&w_up, &spec) - o.q_up).abs());
    }
    verdict(law <= 1e-12 && attain <= 1e-12, format!("observational diff {law:.1e}, attainment error {attain:.1e} on 11 worlds"))
}

fn c5_nonidentifiability() -> Verdict {
    let mut slack = f64::INFINITY;
    let mut law = 0.0f64;
    for (w, spec) in sharpness_cases() {
        let o = exact_bounds_oracle(&w, &spec).unwrap();
        let (w_lo, w_up) = nonidentifiability_pair(&w, &spec).unwrap();
        law = law.max(max_law_diff(&observational_law(&w_lo), &observational_law(&w_up)));
        slack = slack.min((target(&w_up, &spec) - target(&w_lo, &spec)) - (o.q_up - o.q_lo));
    }
    verdict(
        slack >= -1e-12 && law <= 1e-12,
        format!("Q gap minus oracle gap >= {slack:.1e}; pair observational diff {law:.1e}"),
    )
}

fn twin_for(w: &DiscreteWorld, mode: TwinMode) -> WorldTwin {
    WorldTwin::new(w.clone(), mode)
}

fn c6_hoeffding_coverage() -> Verdict {
    let reps = 1000;
    let cases = [
        (brake_pad_world(), whole_space("stopped", vec![AGGRESSIVE], 0.0, 1.0)),
        (two_step_treatment_world(), whole_space("severity", vec![1, 1], 0.0, 2.0)),
    ];
    let mut worst = f64::INFINITY;
    let mut lines = Vec::new();
    for (w, spec) in &cases {
        let o = exact_bounds_oracle(w, spec).unwrap();
        let c = spec.compile(&w.schema).unwrap();
        let twin = twin_for(w, TwinMode::Correct);
        let mut hits = [[0usize; 4]; 2];
        for r in 0..reps {
            let d = sample_observational(w, 500, 70_000 + r);
            let td = generate_twin_dataset(&d, &spec.actions, &twin, 500, 90_000 + r, GenerateOptions::default()).unwrap();
            let obs = collect_observational(&d, &c).summary();
            let tw = collect_twin(&td, &c).unwrap().summary();
            for (k, alpha) in [0.05, 0.1].into_iter().enumerate() {
                let b = hoeffding_decision(&obs, &tw, alpha).unwrap();
                let covered = [b.q_lo <= o.q_lo, b.q_up >= o.q_up, b.q_hat_lo <= o.q, b.q_hat_up >= o.q];
                for (h, ok) in hits[k].iter_mut().zip(covered) {
                    *h += usize::from(ok);
                }
            }
        }
        for (k, alpha) in [0.05f64, 0.1].into_iter().enumerate() {
            let need = 1.0 - alpha / 2.0 - 3.0 * ((alpha / 2.0) * (1.0 - alpha / 2.0) / reps as f64).sqrt();
            let rates: Vec<f64> = hits[k].iter().map(|&h| h as f64 / reps as f64).collect();
            let min = rates.iter().copied().fold(1.0, f64::min);
            worst = worst.min(min - need);
            lines.push(format!("{} a={alpha}: min {min:.3} (need {need:.3})", w.name));
        }
    }
    verdict(worst >= 0.0, lines.join("; "))
}

fn c7_soundness() -> Verdict {
    let reps = 2000u64;
    let strong = RandomWorldConfig { policy_sharpness: 4.0, confounders: 2, ..RandomWorldConfig::default() };
    let mut worlds: Vec<(DiscreteWorld, Vec<HypothesisSpec>)> = vec![
        (
            brake_pad_world(),
            vec![whole_space("stopped", vec![AGGRESSIVE], 0.0, 1.0), whole_space("stopped", vec![GENTLE], 0.0, 1.0)],
        ),
        (brake_pad_world_with(0.99, 0.1), vec![whole_space("stopped", vec![AGGRESSIVE], 0.0, 1.0)]),
        (
            two_step_treatment_world(),
            vec![whole_space("severity", vec![1, 1], 0.0, 2.0), whole_space("severity", vec![0, 0], 0.0, 2.0)],
        ),
    ];
    for seed in [3u64, 4] {
        let w = random_world(seed, &strong).unwrap();
        let outcome = w.outcome_feature.clone();
        worlds.push((w, vec![whole_space(&outcome, vec![0, 1], 0.0, 1.0)]));
    }
    let cfg = TestConfig::default();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (w, specs) in &worlds {
        let twin = twin_for(w, TwinMode::Correct);
        let compiled: Vec<_> = specs.iter().map(|s| s.compile(&w.schema).unwrap()).collect();
        let mut rejected = vec![0usize; specs.len()];
        let mut tested = vec![0usize; specs.len()];
        for r in 0..reps {
            let d = sample_observational(w, 1000, 200_000 + r);
            for (i, c) in compiled.iter().enumerate() {
                let td = generate_twin_dataset(&d, c.actions(), &twin, 1000, 400_000 + r * 8 + i as u64, GenerateOptions::default()).unwrap();
                let o = test_samples(&collect_observational(&d, c), &collect_twin(&td, c).unwrap(), c, &cfg);
                if o.is_tested() {
                    tested[i] += 1;
                    rejected[i] += usize::from(o.p_lo <= cfg.alpha || o.p_up <= cfg.alpha);
                }
            }
        }
        for (rj, t) in rejected.iter().zip(&tested) {
            worst = worst.max(*rj as f64 / (*t).max(1) as f64);
            count += 1;
        }
    }
    let need = 0.05 + 3.0 * (0.05 * 0.95 / reps as f64).sqrt();
    verdict(worst <= need, format!("max per-hypothesis rejection rate {worst:.4} over {count} hypotheses (bar {need:.4})"))
}

fn c8_power() -> Verdict {
    let w = brake_pad_world_with(0.99, 0.1);
    let spec = whole_space("stopped", vec![AGGRESSIVE], 0.0, 1.0);
    let o = exact_bounds_oracle(&w, &spec).unwrap();
    let c = spec.compile(&w.schema).unwrap();
    let twin = twin_for(&w, TwinMode::PropensityBlind);
    let runs = 200u64;
    let mut rates = Vec::new();
    for method in [Method::Hoeffding, Method::Bootstrap] {
        let cfg = TestConfig { method, ..TestConfig::default() };
        let mut hits = 0;
        for r in 0..runs {
            let d = sample_observational(&w, 5000, 600_000 + r);
            let td = generate_twin_dataset(&d, &spec.actions, &twin, 5000, 700_000 + r, GenerateOptions::default()).unwrap();
            let out = test_samples(&collect_observational(&d, &c), &collect_twin(&td, &c).unwrap(), &c, &TestConfig { seed: r, ..cfg.clone() });
            hits += usize::from(out.p_up <= cfg.alpha);
        }
        rates.push(hits as f64 / runs as f64);
    }
    verdict(
        rates[0] >= 0.9 && rates[1] >= 0.95,
        format!(
            "H_up rejected in {:.1}% (Hoeffding), {:.1}% (bootstrap); oracle Q={:.3}, Q_lo={:.3}, Q_up={:.3}, blind-twin mean {:.3}",
            100.0 * rates[0],
            100.0 * rates[1],
            o.q,
            o.q_lo,
            o.q_up,
            o.naive.unwrap()
        ),
    )
}

/// Independent step-down: reject the current minimum while it clears
/// `fwer / remaining`.
fn holm_reference(p: &[f64], fwer: f64) -> Vec<bool> {
    let mut rejected = vec![false; p.len()];
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    for (k, &i) in order.iter().enumerate() {
        if p[i] > fwer / (p.len() - k) as f64 {
            break;
        }
        rejected[i] = true;
    }
    rejected
}

fn c9_p_values() -> Verdict {
    let grid = AlphaGrid::default();
    let mut r = rng(99);
    let (mut cell_misses, mut decision_misses) = (0, 0);
    for _ in 0..100 {
        let mu_lo: f64 = r.gen();
        let width: f64 = r.gen_range(0.0..(1.0 - mu_lo));
        let mu_hat: f64 = r.gen();
        let (n, n_hat) = (r.gen_range(1..5000), r.gen_range(1..5000));
        let obs = BoundSummary {
            n,
            n_agree: n / 2,
            mu_lo: Some(mu_lo),
            mu_up: Some(mu_lo + width),
            propensity_hat: None,
            tightness_hat: None,
            y_lo: 0.0,
            y_up: 1.0,
        };
        let tw = TwinSummary { n_hat, mu_hat: Some(mu_hat) };
        let (g_lo, g_up) = hoeffding_grid_p_values(&obs, &tw, &grid).unwrap();
        let p = p_value_hoeffding_lo(mu_lo, n, mu_hat, n_hat, 1.0);
        let lv = grid.levels();
        // The grid p-value is the first level at or above the closed form.
        let ok = [p * (1.0 + 1e-9), p * (1.0 - 1e-9)]
            .iter()
            .any(|&target| g_lo == lv.iter().copied().find(|&a| a >= target).unwrap_or(1.0));
        cell_misses += usize::from(!ok);
        // p = 1 also encodes "never rejected", so the check stops below 1.
        for &a in lv.iter().filter(|&&a| a < 1.0) {
            let d = hoeffding_decision(&obs, &tw, a).unwrap();
            decision_misses += usize::from((g_lo <= a) != d.reject_lo) + usize::from((g_up <= a) != d.reject_up);
        }
    }
    let mut holm_misses = 0;
    for _ in 0..50 {
        let m = r.gen_range(1..40);
        let p: Vec<f64> = (0..m).map(|_| r.gen::<f64>().powi(4)).collect();
        let fwer = r.gen_range(0.01..0.2);
        holm_misses += usize::from(holm_bonferroni(&p, fwer).rejected != holm_reference(&p, fwer));
    }
    verdict(
        cell_misses + decision_misses + holm_misses == 0,
        format!("{cell_misses} grid-cell misses, {decision_misses} p/decision mismatches, {holm_misses} Holm mismatches"),
    )
}

fn c10_bootstrap() -> Verdict {
    let mut s = rng(5);
    let sample: Vec<f64> = (0..500).map(|_| s.gen::<f64>()).collect();
    let a = BootstrapDistribution::new(&sample, 200, 11).unwrap();
    let b = BootstrapDistribution::new(&sample, 200, 11).unwrap();
    let deterministic = a == b;

    let grid = AlphaGrid::default();
    let lv = grid.levels();
    let nested = lv.windows(2).all(|w| {
        let v = BootstrapVariant::ReversePercentile;
        a.bound(w[0], Side::Lower, v) <= a.bound(w[1], Side::Lower, v) && a.bound(w[0], Side::Upper, v) >= a.bound(w[1], Side::Upper, v)
    });

    let reps = 500;
    let mut covered = 0;
    for r in 0..reps {
        let mut g = rng(9_000 + r);
        let x: Vec<f64> = (0..500).map(|_| g.gen::<f64>().powi(3)).collect();
        let d = BootstrapDistribution::new(&x, 200, r).unwrap();
        let v = BootstrapVariant::ReversePercentile;
        if d.bound(0.05, Side::Lower, v) <= 0.25 && 0.25 <= d.bound(0.05, Side::Upper, v) {
            covered += 1;
        }
    }
    let rate = covered as f64 / reps as f64;
    verdict(
        deterministic && nested && rate >= 0.85,
        format!("deterministic: {deterministic}, nested over {} levels: {nested}, coverage {rate:.3} at nominal 0.95", lv.len()),
    )
}

fn c11_demo() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_twinfalsify"))
        .args(["demo", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    if !out.status.success() {
        return verdict(false, format!("demo exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    let demo: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("demo.json")).unwrap()).unwrap();
    let runs = demo["runs"].as_array().unwrap();
    let columns = ["quantity", "hypotheses", "rejections"];
    let schema_ok = runs.iter().all(|r| {
        let rows = r["report"]["table"].as_array().unwrap();
        !rows.is_empty() && rows.iter().all(|row| columns.iter().all(|c| row.get(c).is_some()))
    });
    let csv = std::fs::read_to_string(dir.path().join("propensity-blind/table.csv")).unwrap();
    let header_ok = csv.starts_with("quantity,hypotheses,rejections");
    let blind = runs.iter().find(|r| r["twin"] == "propensity-blind").unwrap();
    let rejections = blind["report"]["totals"]["rejections"].as_u64().unwrap();
    let point = &blind["report"]["longitudinal"][0];
    verdict(
        secs < 60.0 && schema_ok && header_ok && rejections >= 1,
        format!(
            "{secs:.2} s, table schema ok: {}, propensity-blind Holm rejections: {rejections} (twin mean {:.3} inside [{:.3}, {:.3}])",
            schema_ok && header_ok,
            point["q_hat"].as_f64().unwrap_or(f64::NAN),
            point["q_lo_bound"].as_f64().unwrap_or(f64::NAN),
            point["q_up_bound"].as_f64().unwrap_or(f64::NAN),
        ),
    )
}

fn c12_protocol() -> Verdict {
    let checks: [(&str, fn() -> Result<(), String>); 5] = [
        ("valid frames", protocol::check_valid_frames),
        ("malformed frames", protocol::check_malformed_frames),
        ("timeout", protocol::check_timeout),
        ("crash-restart", protocol::check_crash_restart),
        ("spawn failure", protocol::check_spawn_failure),
    ];
    let failures: Vec<String> = checks
        .iter()
        .filter_map(|(name, f)| f().err().map(|e| format!("{name}: {e}")))
        .collect();
    if failures.is_empty() {
        verdict(true, format!("{} checks against echo-twin", checks.len()))
    } else {
        verdict(false, failures.join("; "))
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Verdict); 12] = [
        (1, "oracle sandwich", c1_oracle_sandwich),
        (2, "sample/population agreement", c2_sample_population_agreement),
        (3, "tightness identity", c3_tightness_identity),
        (4, "sharpness", c4_sharpness),
        (5, "non-identifiability", c5_nonidentifiability),
        (6, "Hoeffding coverage", c6_hoeffding_coverage),
        (7, "soundness under confounding", c7_soundness),
        (8, "power against the propensity-blind twin", c8_power),
        (9, "p-value machinery", c9_p_values),
        (10, "bootstrap sanity", c10_bootstrap),
        (11, "end-to-end demo", c11_demo),
        (12, "protocol conformance", c12_protocol),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let v = run();
        let known = KNOWN_UNATTAINABLE.iter().find(|(k, _)| *k == id);
        println!(
            "{} {id:>2} {name}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        match (v.pass, known) {
            (false, Some((_, why))) => println!("        expected failure: {why}"),
            (true, None) => {}
            _ => unexpected.push(id),
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria as expected ({} known unattainable)", KNOWN_UNATTAINABLE.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected results for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
