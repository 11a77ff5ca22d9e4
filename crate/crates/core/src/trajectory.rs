//! Observational data model: schema, trajectories, datasets, sample
//! splitting, and discretisation of continuous doses into action indices.
//!
//! A trajectory is one record `X0, A1, X1, ..., AT, XT` over a fixed horizon
//! `T`. Observations are real vectors; actions are indices into finite sets.
//! Datasets are newline-delimited JSON, one trajectory per line:
//!
//! ```text
//! {"x0":[63.0,1.0],"steps":[{"a":2,"x":[88.1,1.0]},{"a":0,"x":[91.4,1.0]}]}
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::quantile::{median, quantile_sorted};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Binary,
    /// Encoded as integers `0..cardinality`.
    Categorical { cardinality: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn continuous(name: &str) -> Self {
        Feature {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
        }
    }

    pub fn binary(name: &str) -> Self {
        Feature {
            name: name.to_string(),
            kind: FeatureKind::Binary,
        }
    }

    pub fn categorical(name: &str, cardinality: u32) -> Self {
        Feature {
            name: name.to_string(),
            kind: FeatureKind::Categorical { cardinality },
        }
    }

    fn check_value(&self, v: f64) -> std::result::Result<(), String> {
        if !v.is_finite() {
            return Err(format!("feature `{}` has non-finite value {v}", self.name));
        }
        match self.kind {
            FeatureKind::Continuous => Ok(()),
            FeatureKind::Binary if v == 0.0 || v == 1.0 => Ok(()),
            FeatureKind::Binary => Err(format!("binary feature `{}` has value {v}", self.name)),
            FeatureKind::Categorical { cardinality } => {
                if v.fract() == 0.0 && v >= 0.0 && v < f64::from(cardinality) {
                    Ok(())
                } else {
                    Err(format!(
                        "categorical feature `{}` has value {v}, expected an integer in 0..{cardinality}",
                        self.name
                    ))
                }
            }
        }
    }
}

/// Shape of every trajectory in a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub x0_features: Vec<Feature>,
    pub step_features: Vec<Feature>,
    pub action_cardinalities: Vec<usize>,
}

impl FeatureSchema {
    pub fn new(
        horizon: usize,
        x0_features: Vec<Feature>,
        step_features: Vec<Feature>,
        action_cardinalities: Vec<usize>,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            horizon,
            x0_features,
            step_features,
            action_cardinalities,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidSchema("horizon T must be at least 1".into()));
        }
        if self.action_cardinalities.len() != self.horizon {
            return Err(Error::InvalidSchema(format!(
                "expected {} action cardinalities, found {}",
                self.horizon,
                self.action_cardinalities.len()
            )));
        }
        if let Some(t) = self.action_cardinalities.iter().position(|&c| c == 0) {
            return Err(Error::InvalidSchema(format!(
                "action space at step {} is empty",
                t + 1
            )));
        }
        for (list, what) in [(&self.x0_features, "x0"), (&self.step_features, "step")] {
            let mut seen = HashSet::new();
            for f in list.iter() {
                if !seen.insert(f.name.as_str()) {
                    return Err(Error::InvalidSchema(format!(
                        "duplicate {what} feature `{}`",
                        f.name
                    )));
                }
                if let FeatureKind::Categorical { cardinality: 0 } = f.kind {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature `{}` has zero cardinality",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let schema: FeatureSchema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn x0_index(&self, name: &str) -> Option<usize> {
        self.x0_features.iter().position(|f| f.name == name)
    }

    pub fn step_index(&self, name: &str) -> Option<usize> {
        self.step_features.iter().position(|f| f.name == name)
    }

    /// Feature index for timestep `s` (0 addresses `x0`, `s >= 1` the step features).
    pub fn feature_index(&self, s: usize, name: &str) -> Result<usize> {
        let idx = if s == 0 {
            self.x0_index(name)
        } else {
            self.step_index(name)
        };
        idx.ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn features_at(&self, s: usize) -> &[Feature] {
        if s == 0 {
            &self.x0_features
        } else {
            &self.step_features
        }
    }

    /// Checks one trajectory; `expected_steps` is `T` for observational data
    /// and `t` for twin data.
    pub(crate) fn check_trajectory(
        &self,
        traj: &ObservationalTrajectory,
        expected_steps: usize,
    ) -> std::result::Result<(), String> {
        check_vector(&traj.x0, &self.x0_features, "x0")?;
        if traj.steps.len() != expected_steps {
            return Err(format!(
                "expected {expected_steps} steps, found {}",
                traj.steps.len()
            ));
        }
        for (s, step) in traj.steps.iter().enumerate() {
            let card = self.action_cardinalities[s];
            if step.a >= card {
                return Err(format!(
                    "action {} at step {} is out of range 0..{card}",
                    step.a,
                    s + 1
                ));
            }
            check_vector(&step.x, &self.step_features, &format!("step {}", s + 1))?;
        }
        Ok(())
    }
}

fn check_vector(x: &[f64], features: &[Feature], what: &str) -> std::result::Result<(), String> {
    if x.len() != features.len() {
        return Err(format!(
            "{what}: expected {} values, found {}",
            features.len(),
            x.len()
        ));
    }
    for (v, f) in x.iter().zip(features) {
        f.check_value(*v).map_err(|e| format!("{what}: {e}"))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub a: usize,
    pub x: Vec<f64>,
}

/// One record `X0, A1, X1(A1), ..., AT, XT(A1:T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationalTrajectory {
    pub x0: Vec<f64>,
    pub steps: Vec<Step>,
}

impl ObservationalTrajectory {
    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.a)
    }

    /// Observation at timestep `s` (0 is `x0`).
    pub fn observation(&self, s: usize) -> &[f64] {
        if s == 0 {
            &self.x0
        } else {
            &self.steps[s - 1].x
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectory serializes")
    }
}

/// Immutable collection of i.i.d. trajectories sharing one schema.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    schema: FeatureSchema,
    records: Vec<ObservationalTrajectory>,
    provenance: String,
}

impl TrajectoryDataset {
    pub fn new(
        schema: FeatureSchema,
        records: Vec<ObservationalTrajectory>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        schema.validate()?;
        for (index, r) in records.iter().enumerate() {
            schema
                .check_trajectory(r, schema.horizon)
                .map_err(|message| Error::SchemaViolation { index, message })?;
        }
        Ok(TrajectoryDataset {
            schema,
            records,
            provenance: provenance.into(),
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[ObservationalTrajectory] {
        &self.records
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Canonical newline-delimited JSON encoding.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_ndjson().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical encoding.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_ndjson().as_bytes()))
    }
}

/// Reads a newline-delimited JSON dataset and validates every record.
pub fn load_dataset(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<TrajectoryDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, schema, path.display().to_string())
}

pub fn parse_dataset(
    text: &str,
    schema: &FeatureSchema,
    provenance: impl Into<String>,
) -> Result<TrajectoryDataset> {
    schema.validate()?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let index = records.len();
        let record = record_from_value(&value, schema.horizon)
            .and_then(|r| schema.check_trajectory(&r, schema.horizon).map(|_| r))
            .map_err(|message| Error::SchemaViolation {
                index,
                message: format!("{message} (line {})", lineno + 1),
            })?;
        records.push(record);
    }
    Ok(TrajectoryDataset {
        schema: schema.clone(),
        records,
        provenance: provenance.into(),
    })
}

pub(crate) fn record_from_value(
    value: &Value,
    _horizon: usize,
) -> std::result::Result<ObservationalTrajectory, String> {
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    for key in obj.keys() {
        if key != "x0" && key != "steps" {
            return Err(format!("unexpected field `{key}`"));
        }
    }
    let x0 = numbers(obj.get("x0").ok_or("missing field `x0`")?, "x0")?;
    let steps_v = obj
        .get("steps")
        .ok_or("missing field `steps`")?
        .as_array()
        .ok_or("`steps` is not an array")?;
    let mut steps = Vec::with_capacity(steps_v.len());
    for (s, sv) in steps_v.iter().enumerate() {
        let so = sv
            .as_object()
            .ok_or_else(|| format!("step {} is not an object", s + 1))?;
        for key in so.keys() {
            if key != "a" && key != "x" {
                return Err(format!("step {}: unexpected field `{key}`", s + 1));
            }
        }
        let a = so
            .get("a")
            .ok_or_else(|| format!("step {}: missing field `a`", s + 1))?;
        let a = a
            .as_u64()
            .ok_or_else(|| format!("step {}: action `{a}` is not a nonnegative integer", s + 1))?
            as usize;
        let x = numbers(
            so.get("x")
                .ok_or_else(|| format!("step {}: missing field `x`", s + 1))?,
            &format!("step {} x", s + 1),
        )?;
        steps.push(Step { a, x });
    }
    Ok(ObservationalTrajectory { x0, steps })
}

fn numbers(v: &Value, what: &str) -> std::result::Result<Vec<f64>, String> {
    let arr = v.as_array().ok_or_else(|| format!("`{what}` is not an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, e)| match e {
            Value::Null => Err(format!("{what}[{i}]: missing value")),
            _ => e
                .as_f64()
                .ok_or_else(|| format!("{what}[{i}]: `{e}` is not a number")),
        })
        .collect()
}

/// Random disjoint partition into a held-out part of size
/// `round(fraction * |d|)` and the remainder. Both parts keep the input order.
pub fn split_dataset(
    d: &TrajectoryDataset,
    held_out_fraction: f64,
    seed: u64,
) -> Result<(TrajectoryDataset, TrajectoryDataset)> {
    if !(0.0..=1.0).contains(&held_out_fraction) {
        return Err(Error::InvalidArgument(format!(
            "held-out fraction {held_out_fraction} is outside [0, 1]"
        )));
    }
    let n = d.len();
    let k = ((held_out_fraction * n as f64).round() as usize).min(n);
    let mut rng = seed::rng(seed);
    let mut held = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        held[i] = true;
    }
    let (mut d0, mut main) = (Vec::with_capacity(k), Vec::with_capacity(n - k));
    for (r, h) in d.records.iter().zip(&held) {
        if *h {
            d0.push(r.clone());
        } else {
            main.push(r.clone());
        }
    }
    let part = |records, tag: &str| TrajectoryDataset {
        schema: d.schema.clone(),
        records,
        provenance: format!("{}#{tag}(fraction={held_out_fraction},seed={seed})", d.provenance),
    };
    Ok((part(d0, "held-out"), part(main, "main")))
}

/// Number of bins per dose dimension: one zero bin and four quartile bins.
pub const BINS_PER_DIM: usize = 5;

/// Bins for one raw dose column.
///
/// Bin 0 holds exactly-zero doses. Positive doses fall into bins 1..=4
/// delimited by the interior `edges`: `(0, e1)`, `[e1, e2)`, `[e2, e3)`,
/// `[e3, inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoseBins {
    pub column: String,
    pub edges: [f64; 3],
    pub representatives: [f64; BINS_PER_DIM],
}

impl DoseBins {
    /// Nonpositive doses map to bin 0.
    pub fn bin(&self, dose: f64) -> usize {
        if dose <= 0.0 {
            0
        } else {
            1 + self.edges.iter().filter(|&&e| dose >= e).count()
        }
    }
}

/// Per-dimension dose bins; the action index is the mixed-radix combination
/// of the per-dimension bins, first column most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBinning {
    pub dims: Vec<DoseBins>,
}

impl ActionBinning {
    pub fn cardinality(&self) -> usize {
        BINS_PER_DIM.pow(self.dims.len() as u32)
    }

    pub fn action_index(&self, doses: &[f64]) -> usize {
        self.dims
            .iter()
            .zip(doses)
            .fold(0, |acc, (d, &dose)| acc * BINS_PER_DIM + d.bin(dose))
    }

    /// Median dose of each dimension's bin for the given action index.
    pub fn representative_doses(&self, action: usize) -> Vec<f64> {
        let mut bins = vec![0; self.dims.len()];
        let mut rest = action;
        for b in bins.iter_mut().rev() {
            *b = rest % BINS_PER_DIM;
            rest /= BINS_PER_DIM;
        }
        self.dims
            .iter()
            .zip(bins)
            .map(|(d, b)| d.representatives[b])
            .collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("binning serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rewrites every action from the dose columns recorded in the step
    /// observation `x_t` (the dose administered as `A_t`).
    pub fn apply(&self, d: &TrajectoryDataset) -> Result<TrajectoryDataset> {
        let cols = self
            .dims
            .iter()
            .map(|dim| {
                d.schema
                    .step_index(&dim.column)
                    .ok_or_else(|| Error::UnknownFeature(dim.column.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut schema = d.schema.clone();
        schema.action_cardinalities = vec![self.cardinality(); schema.horizon];
        let records = d
            .records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                for step in &mut r.steps {
                    let doses: Vec<f64> = cols.iter().map(|&c| step.x[c]).collect();
                    step.a = self.action_index(&doses);
                }
                r
            })
            .collect();
        TrajectoryDataset::new(schema, records, format!("{}#binned", d.provenance))
    }
}

/// Fits zero/quartile dose bins on the held-out data. Doses are read from
/// every step of the named step-feature columns.
pub fn fit_action_binning(d0: &TrajectoryDataset, raw_dose_columns: &[&str]) -> Result<ActionBinning> {
    let mut dims = Vec::with_capacity(raw_dose_columns.len());
    for &column in raw_dose_columns {
        let idx = d0
            .schema
            .step_index(column)
            .ok_or_else(|| Error::UnknownFeature(column.to_string()))?;
        if d0.schema.step_features[idx].kind != FeatureKind::Continuous {
            return Err(Error::InvalidArgument(format!(
                "dose column `{column}` is not continuous"
            )));
        }
        let doses: Vec<f64> = d0
            .records
            .iter()
            .flat_map(|r| r.steps.iter().map(move |s| s.x[idx]))
            .collect();
        if let Some(neg) = doses.iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dose column `{column}` has negative value {neg}"
            )));
        }
        let mut positive: Vec<f64> = doses.iter().copied().filter(|&v| v > 0.0).collect();
        if positive.is_empty() {
            return Err(Error::DegenerateBinning {
                column: column.to_string(),
                reason: "no positive doses in the held-out data".into(),
            });
        }
        positive.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&positive, p).expect("nonempty");
        let edges = [q(0.25), q(0.5), q(0.75)];
        if !(edges[0] < edges[1] && edges[1] < edges[2]) {
            return Err(Error::DegenerateBinning {
                column: column.to_string(),
                reason: format!("quartile edges {edges:?} are not strictly increasing"),
            });
        }
        let mut dim = DoseBins {
            column: column.to_string(),
            edges,
            representatives: [0.0; BINS_PER_DIM],
        };
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); BINS_PER_DIM];
        for &v in &doses {
            members[dim.bin(v)].push(v);
        }
        for (b, m) in members.iter().enumerate() {
            dim.representatives[b] = median(m).unwrap_or(match b {
                0 => 0.0,
                1 => edges[0] / 2.0,
                2 | 3 => (edges[b - 2] + edges[b - 1]) / 2.0,
                _ => edges[2],
            });
        }
        dims.push(dim);
    }
    Ok(ActionBinning { dims })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            2,
            vec![Feature::continuous("age"), Feature::binary("sex")],
            vec![Feature::continuous("hr"), Feature::continuous("iv")],
            vec![3, 3],
        )
        .unwrap()
    }

    const LINE: &str = r#"{"x0":[63.5,1.0],"steps":[{"a":2,"x":[88.25,0.0]},{"a":0,"x":[91.0,12.5]}]}"#;

    #[test]
    fn empty_file_gives_empty_dataset() {
        let d = parse_dataset("", &schema(), "t").unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn single_record_round_trips_byte_identically() {
        let text = format!("{LINE}\n");
        let d = parse_dataset(&text, &schema(), "t").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.to_ndjson(), text);
    }

    #[test]
    fn short_trajectory_names_record_index() {
        let short = r#"{"x0":[63.5,1.0],"steps":[{"a":2,"x":[88.25,0.0]}]}"#;
        let text = format!("{LINE}\n{short}\n");
        match parse_dataset(&text, &schema(), "t") {
            Err(Error::SchemaViolation { index, message }) => {
                assert_eq!(index, 1);
                assert!(message.contains("expected 2 steps"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{LINE}\n{{not json\n");
        match parse_dataset(&text, &schema(), "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_values_and_bad_actions() {
        let missing = r#"{"x0":[null,1.0],"steps":[{"a":2,"x":[88.25,0.0]},{"a":0,"x":[91.0,12.5]}]}"#;
        assert!(matches!(
            parse_dataset(missing, &schema(), "t"),
            Err(Error::SchemaViolation { index: 0, .. })
        ));
        let bad_action = LINE.replace("\"a\":2", "\"a\":3");
        assert!(matches!(
            parse_dataset(&bad_action, &schema(), "t"),
            Err(Error::SchemaViolation { .. })
        ));
        let no_a = LINE.replace("\"a\":2,", "");
        assert!(matches!(
            parse_dataset(&no_a, &schema(), "t"),
            Err(Error::SchemaViolation { .. })
        ));
        let bad_sex = LINE.replace("63.5,1.0", "63.5,0.5");
        assert!(matches!(
            parse_dataset(&bad_sex, &schema(), "t"),
            Err(Error::SchemaViolation { .. })
        ));
    }

    #[test]
    fn schema_json_shape() {
        let s = schema();
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["T"], 2);
        assert_eq!(json["x0_features"][1]["kind"], "binary");
        let back = FeatureSchema::from_json_str(&s.to_json_pretty()).unwrap();
        assert_eq!(back, s);
        let cat = r#"{"T":1,"x0_features":[{"name":"ward","kind":"categorical","cardinality":4}],"step_features":[],"action_cardinalities":[2]}"#;
        let s2 = FeatureSchema::from_json_str(cat).unwrap();
        assert_eq!(s2.x0_features[0].kind, FeatureKind::Categorical { cardinality: 4 });
    }

    #[test]
    fn schema_invariants() {
        assert!(FeatureSchema::new(0, vec![], vec![], vec![]).is_err());
        assert!(FeatureSchema::new(1, vec![], vec![], vec![0]).is_err());
        assert!(FeatureSchema::new(1, vec![], vec![], vec![2, 2]).is_err());
        assert!(FeatureSchema::new(
            1,
            vec![Feature::continuous("a"), Feature::binary("a")],
            vec![],
            vec![2]
        )
        .is_err());
    }

    fn dataset(n: usize) -> TrajectoryDataset {
        let records = (0..n)
            .map(|i| ObservationalTrajectory {
                x0: vec![i as f64, (i % 2) as f64],
                steps: vec![
                    Step { a: i % 3, x: vec![1.0, 0.0] },
                    Step { a: 0, x: vec![2.0, 0.0] },
                ],
            })
            .collect();
        TrajectoryDataset::new(schema(), records, "synthetic").unwrap()
    }

    #[test]
    fn split_edge_fractions() {
        let d = dataset(10);
        let (d0, main) = split_dataset(&d, 0.0, 1).unwrap();
        assert!(d0.is_empty());
        assert_eq!(main.records(), d.records());
        let (d0, main) = split_dataset(&d, 1.0, 1).unwrap();
        assert!(main.is_empty());
        assert_eq!(d0.records(), d.records());
        assert!(split_dataset(&d, 1.5, 1).is_err());
    }

    #[test]
    fn split_five_percent_is_reproducible() {
        let d = dataset(100);
        let (a0, a1) = split_dataset(&d, 0.05, 42).unwrap();
        let (b0, b1) = split_dataset(&d, 0.05, 42).unwrap();
        assert_eq!((a0.len(), a1.len()), (5, 95));
        assert_eq!(a0.records(), b0.records());
        assert_eq!(a1.records(), b1.records());
    }

    #[test]
    fn split_seeds_differ() {
        let d = dataset(10);
        let base = split_dataset(&d, 0.5, 0).unwrap().0;
        let differs = (1..=5).any(|s| split_dataset(&d, 0.5, s).unwrap().0.records() != base.records());
        assert!(differs);
    }

    fn dose_dataset(doses: &[[f64; 2]]) -> TrajectoryDataset {
        let records = doses
            .iter()
            .map(|d| ObservationalTrajectory {
                x0: vec![50.0, 0.0],
                steps: vec![
                    Step { a: 0, x: vec![80.0, d[0]] },
                    Step { a: 0, x: vec![80.0, d[1]] },
                ],
            })
            .collect();
        TrajectoryDataset::new(schema(), records, "doses").unwrap()
    }

    #[test]
    fn binning_quartile_edges() {
        let d0 = dose_dataset(&[[10.0, 20.0], [30.0, 40.0], [0.0, 0.0]]);
        let b = fit_action_binning(&d0, &["iv"]).unwrap();
        assert_eq!(b.dims[0].edges, [17.5, 25.0, 32.5]);
        assert_eq!(b.dims[0].bin(0.0), 0);
        assert_eq!(b.dims[0].bin(10.0), 1);
        assert_eq!(b.dims[0].bin(17.5), 2);
        assert_eq!(b.dims[0].bin(1e9), 4);
        assert_eq!(b.dims[0].representatives, [0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(b.cardinality(), 5);
    }

    #[test]
    fn binning_degenerate_without_positive_doses() {
        let d0 = dose_dataset(&[[0.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(
            fit_action_binning(&d0, &["iv"]),
            Err(Error::DegenerateBinning { .. })
        ));
        assert!(matches!(
            fit_action_binning(&d0, &["nope"]),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn binning_mixed_radix_and_apply() {
        let d0 = dose_dataset(&[[10.0, 20.0], [30.0, 40.0], [0.0, 5.0]]);
        let one = fit_action_binning(&d0, &["iv"]).unwrap();
        let two = ActionBinning {
            dims: vec![one.dims[0].clone(), one.dims[0].clone()],
        };
        assert_eq!(two.cardinality(), 25);
        assert_eq!(two.action_index(&[0.0, 100.0]), 4);
        assert_eq!(two.action_index(&[100.0, 0.0]), 20);
        // Positive doses 5, 10, 20, 30, 40 give edges 10, 20, 30.
        assert_eq!(two.representative_doses(21), vec![35.0, 5.0]);

        let applied = one.apply(&d0).unwrap();
        assert_eq!(applied.schema().action_cardinalities, vec![5, 5]);
        let acts: Vec<usize> = applied.records()[0].actions().collect();
        assert_eq!(acts, vec![2, 3]);
        let json: serde_json::Value = serde_json::from_str(&one.to_json_pretty()).unwrap();
        assert_eq!(json["dims"][0]["edges"].as_array().unwrap().len(), 3);
        assert_eq!(json["dims"][0]["representatives"].as_array().unwrap().len(), 5);
    }
}
