//! Per-sample audit records, the aggregate summary and their file formats.

mod explain;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{EncodedDataset, IngestStats};
use crate::matrix::Matrix;
use crate::schema::{DecodedValue, EncodingLayout, Slot};
use crate::solver::{Membership, ProjectionResult, RowOutcome};

pub use explain::explain_sample;

pub const SCHEMA_VERSION: &str = "1";
/// Floor of the relative-change denominator, in raw units.
pub const EPS_REL: f64 = 1e-9;
pub const DEFAULT_BINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Inside,
    OutsidePath,
    OutsideNoPath,
}

impl SampleStatus {
    pub fn is_outside(self) -> bool {
        self != SampleStatus::Inside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDelta {
    pub feature: String,
    pub query: DecodedValue,
    pub projected: DecodedValue,
    /// `x_h - x` in raw units (numeric features only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    /// `|delta| / max(|x|, 1e-9)` (numeric features only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relative_change: Option<f64>,
    /// Categorical mass moved away from the query's level (categorical only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mass_moved: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    pub weight: f64,
    pub train_row: usize,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub schema_version: String,
    pub row_id: usize,
    pub status: SampleStatus,
    pub has_continuous_path: bool,
    pub distance: f64,
    pub raw_distance: f64,
    pub certified: bool,
    pub certificate: f64,
    pub iterations: usize,
    pub per_feature_delta: Vec<FeatureDelta>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub support: Option<Vec<SupportEntry>>,
    #[serde(skip_serializing_if = "is_false", default)]
    pub support_suppressed: bool,
    #[serde(skip_serializing_if = "is_false", default)]
    pub non_unique_weights: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl SampleRecord {
    /// Drops training identities and weights.
    pub fn redacted(mut self) -> Self {
        self.support = None;
        self.support_suppressed = true;
        self
    }
}

/// Status of one projection given the path check.
pub fn classify(result: Option<&ProjectionResult>, has_path: bool) -> SampleStatus {
    if !has_path {
        return SampleStatus::OutsideNoPath;
    }
    match result {
        Some(r) if r.status == Membership::Inside => SampleStatus::Inside,
        _ => SampleStatus::OutsidePath,
    }
}

/// Per-feature raw-unit deltas between a query and its projection.
pub fn feature_deltas(layout: &EncodingLayout, query: &[f64], projected: &[f64]) -> Vec<FeatureDelta> {
    let q = layout.decode_point(query).expect("query width checked by caller");
    let p = layout.decode_point(projected).expect("projection width checked by caller");
    let mut out = Vec::with_capacity(q.values.len());
    for (i, ((name, qv), (_, pv))) in q.values.into_iter().zip(p.values).enumerate() {
        let (delta, relative_change, mass_moved) = match layout.slots[i] {
            Slot::Numeric(_) => match (&qv, &pv) {
                (DecodedValue::Number(a), DecodedValue::Number(b)) => {
                    let d = b - a;
                    (Some(d), Some(d.abs() / a.abs().max(EPS_REL)), None)
                }
                _ => (None, None, None),
            },
            Slot::Group(g) => {
                let span = &layout.groups[g];
                let qb = &query[span.range()];
                let pb = &projected[span.range()];
                let moved = 0.5 * qb.iter().zip(pb).map(|(a, b)| (a - b).abs()).sum::<f64>();
                (None, None, Some(moved))
            }
        };
        out.push(FeatureDelta { feature: name, query: qv, projected: pv, delta, relative_change, mass_moved });
    }
    out
}

/// Record for one batch row. `top_k` bounds the support list.
pub fn build_record(
    outcome: &RowOutcome,
    train: &EncodedDataset,
    test: &EncodedDataset,
    top_k: usize,
    redact: bool,
) -> SampleRecord {
    let query = test.point(outcome.index);
    let status = classify(outcome.result.as_ref(), outcome.has_continuous_path);
    let mut record = SampleRecord {
        schema_version: SCHEMA_VERSION.to_owned(),
        row_id: test.row_ids[outcome.index],
        status,
        has_continuous_path: outcome.has_continuous_path,
        distance: f64::NAN,
        raw_distance: f64::NAN,
        certified: false,
        certificate: f64::NAN,
        iterations: 0,
        per_feature_delta: Vec::new(),
        support: None,
        support_suppressed: false,
        non_unique_weights: false,
        error: outcome.error.clone(),
    };
    if let Some(r) = &outcome.result {
        record.distance = r.distance;
        record.raw_distance = r.raw_distance;
        record.certified = r.certified;
        record.certificate = r.certificate;
        record.iterations = r.iterations;
        record.non_unique_weights = r.non_unique_weights;
        record.per_feature_delta = feature_deltas(&test.layout, query, &r.point);
        record.support = Some(
            r.weights
                .iter()
                .take(top_k)
                .map(|&(i, w)| SupportEntry { weight: w, train_row: train.row_ids[i] })
                .collect(),
        );
    }
    if redact {
        record.redacted()
    } else {
        record
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub inside: usize,
    pub outside_path: usize,
    pub outside_no_path: usize,
}

impl StatusCounts {
    pub fn total(&self) -> usize {
        self.inside + self.outside_path + self.outside_no_path
    }

    pub fn add(&mut self, s: SampleStatus) {
        match s {
            SampleStatus::Inside => self.inside += 1,
            SampleStatus::OutsidePath => self.outside_path += 1,
            SampleStatus::OutsideNoPath => self.outside_no_path += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatusFractions {
    pub inside: f64,
    pub outside_path: f64,
    pub outside_no_path: f64,
}

impl StatusFractions {
    pub fn from_counts(c: &StatusCounts) -> Self {
        let n = c.total();
        if n == 0 {
            return Self::default();
        }
        let n = n as f64;
        let inside = c.inside as f64 / n;
        let outside_no_path = c.outside_no_path as f64 / n;
        // Derived from the other two so the fractions sum to one.
        let outside_path = 1.0 - inside - outside_no_path;
        Self { inside, outside_path, outside_no_path }
    }

    pub fn outside(&self) -> f64 {
        self.outside_path + self.outside_no_path
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `bins` equal-width bins over the observed range. Empty input gives an
    /// empty histogram.
    pub fn equal_width(values: &[f64], bins: usize) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() || bins == 0 {
            return Self::default();
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0; bins];
        for v in finite {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Short spectrum digest carried by the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionsDigest {
    pub rows: usize,
    pub rank: usize,
    pub full_rank: bool,
    pub condition_number: f64,
    pub dominant_patterns: usize,
    pub clusters: Option<usize>,
    pub top_redundant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub schema_version: String,
    pub total: usize,
    pub counts: StatusCounts,
    pub fractions: StatusFractions,
    pub failures: usize,
    pub uncertified: usize,
    pub distance_histogram: Histogram,
    pub raw_distance_histogram: Histogram,
    /// Distances of the outside samples that do have a continuous path.
    pub path_distance_histogram: Histogram,
    /// Mean relative change per numeric feature over outside-with-path
    /// samples.
    pub mean_relative_change: BTreeMap<String, f64>,
    pub config: serde_json::Value,
    pub ingest: BTreeMap<String, IngestStats>,
    pub directions: Option<DirectionsDigest>,
    /// Choices the numbers depend on, stated plainly.
    pub disclosures: Vec<String>,
}

/// Aggregates records into a summary.
pub fn summarize(
    records: &[SampleRecord],
    config: serde_json::Value,
    ingest: BTreeMap<String, IngestStats>,
    directions: Option<DirectionsDigest>,
) -> AuditSummary {
    let mut counts = StatusCounts::default();
    let mut outside = Vec::new();
    let mut outside_raw = Vec::new();
    let mut path_only = Vec::new();
    let mut rel: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records {
        counts.add(r.status);
        if r.status.is_outside() {
            outside.push(r.distance);
            outside_raw.push(r.raw_distance);
        }
        if r.status == SampleStatus::OutsidePath {
            path_only.push(r.distance);
            for d in &r.per_feature_delta {
                if let Some(c) = d.relative_change {
                    let e = rel.entry(d.feature.clone()).or_insert((0.0, 0));
                    e.0 += c;
                    e.1 += 1;
                }
            }
        }
    }
    let mean_relative_change = rel.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    AuditSummary {
        schema_version: SCHEMA_VERSION.to_owned(),
        total: records.len(),
        fractions: StatusFractions::from_counts(&counts),
        counts,
        failures: records.iter().filter(|r| r.error.is_some()).count(),
        uncertified: records.iter().filter(|r| !r.certified).count(),
        distance_histogram: Histogram::equal_width(&outside, DEFAULT_BINS),
        raw_distance_histogram: Histogram::equal_width(&outside_raw, DEFAULT_BINS),
        path_distance_histogram: Histogram::equal_width(&path_only, DEFAULT_BINS),
        mean_relative_change,
        config,
        ingest,
        directions,
        disclosures: default_disclosures(),
    }
}

pub fn default_disclosures() -> Vec<String> {
    vec![
        "relative change = |projected - query| / max(|query|, 1e-9), raw units".into(),
        "categorical levels are one-hot 0/1 columns and are never scaled; switching a level costs sqrt(2)".into(),
        "distance is measured in the scaled space; raw_distance unscales numeric columns".into(),
        "a sample is inside when its scaled distance is at most membership_eps".into(),
        "outside_no_path: no training row shares the sample's levels on the path groups".into(),
        "histograms use equal-width bins over the observed range of outside samples".into(),
    ]
}

/// Rebuilds `x_h - x` (scaled space) from a record's raw deltas.
pub fn scaled_direction(record: &SampleRecord, layout: &EncodingLayout) -> Option<Vec<f64>> {
    if record.per_feature_delta.len() != layout.schema.features.len() {
        return None;
    }
    let mut v = vec![0.0; layout.width()];
    for (i, d) in record.per_feature_delta.iter().enumerate() {
        match layout.slots[i] {
            Slot::Numeric(k) => {
                let col = &layout.numeric[k];
                v[col.column] = d.delta? / col.scale.scale;
            }
            Slot::Group(g) => {
                let span = &layout.groups[g];
                let q = block_weights(&d.query, &span.levels)?;
                let p = block_weights(&d.projected, &span.levels)?;
                for j in 0..span.len() {
                    v[span.start + j] = p[j] - q[j];
                }
            }
        }
    }
    Some(v)
}

fn block_weights(value: &DecodedValue, levels: &[String]) -> Option<Vec<f64>> {
    match value {
        DecodedValue::Level(l) => Some(levels.iter().map(|x| if x == l { 1.0 } else { 0.0 }).collect()),
        DecodedValue::Empty => Some(vec![0.0; levels.len()]),
        DecodedValue::Mixture { weights, .. } => Some(levels.iter().map(|x| weights.get(x).copied().unwrap_or(0.0)).collect()),
        DecodedValue::Number(_) => None,
    }
}

/// Directions matrix from stored records (outside-with-path rows only).
pub fn directions_from_records(records: &[SampleRecord], layout: &EncodingLayout) -> (Matrix, Vec<usize>) {
    let mut data = Vec::new();
    let mut ids = Vec::new();
    for r in records.iter().filter(|r| r.status == SampleStatus::OutsidePath) {
        if let Some(v) = scaled_direction(r, layout) {
            data.extend(v);
            ids.push(r.row_id);
        }
    }
    (Matrix::from_vec(ids.len(), layout.width(), data), ids)
}

pub fn write_jsonl(records: &[SampleRecord], path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl(path: &Path) -> std::io::Result<Vec<SampleRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Flat CSV: one row per record, one `delta:<feature>` column per numeric
/// feature and one `mass_moved:<feature>` column per categorical feature.
pub fn write_csv(records: &[SampleRecord], path: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    let features: Vec<(String, bool)> = records
        .iter()
        .find(|r| !r.per_feature_delta.is_empty())
        .map(|r| r.per_feature_delta.iter().map(|d| (d.feature.clone(), d.delta.is_some())).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["schema_version", "row_id", "status", "has_continuous_path", "distance", "raw_distance", "certified"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for (f, numeric) in &features {
        header.push(if *numeric { format!("delta:{f}") } else { format!("mass_moved:{f}") });
    }
    w.write_record(&header)?;
    for r in records {
        let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        let mut row = vec![
            r.schema_version.clone(),
            r.row_id.to_string(),
            status,
            r.has_continuous_path.to_string(),
            r.distance.to_string(),
            r.raw_distance.to_string(),
            r.certified.to_string(),
        ];
        for (i, _) in features.iter().enumerate() {
            let cell = r
                .per_feature_delta
                .get(i)
                .and_then(|d| d.delta.or(d.mass_moved))
                .map(|v| v.to_string())
                .unwrap_or_default();
            row.push(cell);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
