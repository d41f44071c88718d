use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureSchema, RawRow, RawValue, SchemaError};

/// Scaler applied to continuous and integer columns. One-hot columns are
/// never scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    #[default]
    ZScore,
    MinMax,
    None,
}

impl fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalerKind::ZScore => "zscore",
            ScalerKind::MinMax => "minmax",
            ScalerKind::None => "none",
        })
    }
}

impl std::str::FromStr for ScalerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zscore" | "z_score" => Ok(ScalerKind::ZScore),
            "minmax" | "min_max" => Ok(ScalerKind::MinMax),
            "none" => Ok(ScalerKind::None),
            other => Err(format!("unknown scaler `{other}`")),
        }
    }
}

/// `encoded = (raw - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub offset: f64,
    pub scale: f64,
}

impl ColumnScale {
    pub const IDENTITY: ColumnScale = ColumnScale { offset: 0.0, scale: 1.0 };

    #[inline]
    pub fn encode(&self, raw: f64) -> f64 {
        (raw - self.offset) / self.scale
    }

    #[inline]
    pub fn decode(&self, encoded: f64) -> f64 {
        encoded * self.scale + self.offset
    }
}

/// Encoded column descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
}

impl ColumnInfo {
    pub fn label(&self) -> String {
        match &self.level {
            Some(level) => format!("{}={}", self.feature, level),
            None => self.feature.clone(),
        }
    }
}

/// Span of one-hot columns belonging to a categorical feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpan {
    pub feature: String,
    pub feature_index: usize,
    pub start: usize,
    pub levels: Vec<String>,
    pub optional: bool,
}

impl GroupSpan {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.levels.len()
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericColumn {
    pub feature: String,
    pub feature_index: usize,
    pub column: usize,
    pub integer: bool,
    pub scale: ColumnScale,
}

/// Per-feature slot in the encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Numeric(usize),
    Group(usize),
}

/// Map between raw rows and points in the encoded design space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingLayout {
    pub schema: FeatureSchema,
    pub scaler: ScalerKind,
    pub columns: Vec<ColumnInfo>,
    pub numeric: Vec<NumericColumn>,
    pub groups: Vec<GroupSpan>,
    /// Feature index -> slot in `numeric` or `groups`.
    pub slots: Vec<Slot>,
}

/// A decoded feature value. Categorical mass that is not a pure level is kept
/// as weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecodedValue {
    Number(f64),
    Level(String),
    /// Group left empty (optional groups only).
    Empty,
    Mixture {
        weights: BTreeMap<String, f64>,
        /// Weights are negative, exceed one, or do not sum to one.
        non_simplex: bool,
    },
}

impl fmt::Display for DecodedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodedValue::Number(v) => write!(f, "{}", fmt_number(*v)),
            DecodedValue::Level(l) => write!(f, "{l}"),
            DecodedValue::Empty => write!(f, "(none)"),
            DecodedValue::Mixture { weights, non_simplex } => {
                let mut parts: Vec<(&String, &f64)> =
                    weights.iter().filter(|(_, w)| w.abs() > 1e-9).collect();
                parts.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
                let body = parts
                    .iter()
                    .map(|(l, w)| format!("{}% {}", fmt_number(**w * 100.0), l))
                    .collect::<Vec<_>>()
                    .join(" / ");
                if *non_simplex {
                    write!(f, "{body} (not a convex mixture)")
                } else {
                    write!(f, "{body}")
                }
            }
        }
    }
}

pub(crate) fn fmt_number(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round())
    } else if v.abs() >= 100.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

/// Decoded point: one value per feature, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedRow {
    pub values: Vec<(String, DecodedValue)>,
}

impl DecodedRow {
    pub fn get(&self, feature: &str) -> Option<&DecodedValue> {
        self.values.iter().find(|(n, _)| n == feature).map(|(_, v)| v)
    }

    /// Converts back to a raw row when every categorical block is pure.
    pub fn to_raw(&self) -> Option<RawRow> {
        self.values
            .iter()
            .map(|(_, v)| match v {
                DecodedValue::Number(x) => Some(RawValue::Number(*x)),
                DecodedValue::Level(l) => Some(RawValue::Level(l.clone())),
                DecodedValue::Empty => Some(RawValue::Missing),
                DecodedValue::Mixture { .. } => None,
            })
            .collect()
    }
}

impl fmt::Display for DecodedRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|(n, v)| format!("{n}: {v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Fits the layout on the training rows: scaler parameters come from these
/// rows only. Rows containing a missing value in a numeric feature are
/// ignored for fitting; callers apply the missing-value policy beforehand.
pub fn build_layout(
    schema: &FeatureSchema,
    scaler: ScalerKind,
    training_rows: &[RawRow],
) -> Result<EncodingLayout, SchemaError> {
    schema.validate()?;
    if training_rows.is_empty() {
        return Err(SchemaError::EmptyTrainingSet);
    }
    let mut columns = Vec::new();
    let mut numeric = Vec::new();
    let mut groups = Vec::new();
    let mut slots = Vec::with_capacity(schema.features.len());

    for (fi, feat) in schema.features.iter().enumerate() {
        match &feat.kind {
            FeatureKind::Categorical { optional, .. } => {
                let levels = feat.effective_levels().expect("categorical");
                slots.push(Slot::Group(groups.len()));
                let start = columns.len();
                for level in &levels {
                    columns.push(ColumnInfo { feature: feat.name.clone(), level: Some(level.clone()) });
                }
                groups.push(GroupSpan {
                    feature: feat.name.clone(),
                    feature_index: fi,
                    start,
                    levels,
                    optional: *optional,
                });
            }
            kind => {
                let values: Vec<f64> = training_rows
                    .iter()
                    .filter_map(|row| match row.get(fi) {
                        Some(RawValue::Number(v)) => Some(*v),
                        _ => None,
                    })
                    .collect();
                let scale = fit_scale(scaler, &values);
                slots.push(Slot::Numeric(numeric.len()));
                numeric.push(NumericColumn {
                    feature: feat.name.clone(),
                    feature_index: fi,
                    column: columns.len(),
                    integer: matches!(kind, FeatureKind::Integer { .. }),
                    scale,
                });
                columns.push(ColumnInfo { feature: feat.name.clone(), level: None });
            }
        }
    }
    Ok(EncodingLayout { schema: schema.clone(), scaler, columns, numeric, groups, slots })
}

fn fit_scale(kind: ScalerKind, values: &[f64]) -> ColumnScale {
    if values.is_empty() {
        return ColumnScale::IDENTITY;
    }
    let n = values.len() as f64;
    match kind {
        ScalerKind::None => ColumnScale::IDENTITY,
        ScalerKind::ZScore => {
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            ColumnScale { offset: mean, scale: if std > 0.0 { std } else { 1.0 } }
        }
        ScalerKind::MinMax => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            ColumnScale { offset: lo, scale: if span > 0.0 { span } else { 1.0 } }
        }
    }
}

impl EncodingLayout {
    /// Encoded width `d`.
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn group(&self, feature: &str) -> Option<&GroupSpan> {
        self.groups.iter().find(|g| g.feature == feature)
    }

    pub fn group_index(&self, feature: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.feature == feature)
    }

    pub fn column_labels(&self) -> Vec<String> {
        self.columns.iter().map(ColumnInfo::label).collect()
    }

    /// Index of the column `feature=level`, or of the numeric column `feature`.
    pub fn column_index(&self, feature: &str, level: Option<&str>) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.feature == feature && c.level.as_deref() == level)
    }

    /// Encodes a schema-conforming row. Missing values are only accepted in
    /// optional categorical groups.
    pub fn encode_row(&self, row: &[RawValue]) -> Result<Vec<f64>, SchemaError> {
        let mut out = vec![0.0; self.width()];
        self.encode_into(row, &mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, row: &[RawValue], out: &mut [f64]) -> Result<(), SchemaError> {
        let n_features = self.schema.features.len();
        if row.len() != n_features {
            return Err(SchemaError::DimensionMismatch { expected: n_features, got: row.len() });
        }
        if out.len() != self.width() {
            return Err(SchemaError::DimensionMismatch { expected: self.width(), got: out.len() });
        }
        for (fi, value) in row.iter().enumerate() {
            let feature = &self.schema.features[fi];
            match self.slots[fi] {
                Slot::Numeric(k) => {
                    let col = &self.numeric[k];
                    match value {
                        RawValue::Number(v) => out[col.column] = col.scale.encode(*v),
                        _ => return Err(SchemaError::KindMismatch { feature: feature.name.clone() }),
                    }
                }
                Slot::Group(g) => {
                    let span = &self.groups[g];
                    out[span.range()].iter_mut().for_each(|v| *v = 0.0);
                    match value {
                        RawValue::Level(level) => {
                            let idx = span.level_index(level).ok_or_else(|| SchemaError::UnknownLevel {
                                feature: feature.name.clone(),
                                level: level.clone(),
                            })?;
                            out[span.start + idx] = 1.0;
                        }
                        RawValue::Missing if span.optional => {}
                        _ => return Err(SchemaError::KindMismatch { feature: feature.name.clone() }),
                    }
                }
            }
        }
        Ok(())
    }

    /// Decodes an encoded point. Categorical blocks that are not a pure
    /// one-hot vector are reported as level weights, flagged when they do not
    /// form a convex mixture.
    pub fn decode_point(&self, point: &[f64]) -> Result<DecodedRow, SchemaError> {
        if point.len() != self.width() {
            return Err(SchemaError::DimensionMismatch { expected: self.width(), got: point.len() });
        }
        let mut values = Vec::with_capacity(self.schema.features.len());
        for (fi, feat) in self.schema.features.iter().enumerate() {
            let value = match self.slots[fi] {
                Slot::Numeric(k) => {
                    let col = &self.numeric[k];
                    DecodedValue::Number(col.scale.decode(point[col.column]))
                }
                Slot::Group(g) => decode_group(&self.groups[g], &point[self.groups[g].range()]),
            };
            values.push((feat.name.clone(), value));
        }
        Ok(DecodedRow { values })
    }

    /// Raw-unit difference `b - a` per encoded column (numeric columns
    /// unscaled, one-hot columns as is).
    pub fn raw_column_delta(&self, column: usize, a: f64, b: f64) -> f64 {
        match self.numeric.iter().find(|c| c.column == column) {
            Some(col) => (b - a) * col.scale.scale,
            None => b - a,
        }
    }

    /// Per-column multiplier turning scaled differences into raw units.
    pub fn raw_scale_vector(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.width()];
        for col in &self.numeric {
            s[col.column] = col.scale.scale;
        }
        s
    }

    /// Euclidean distance in raw units (numeric columns unscaled, one-hot
    /// columns as 0/1).
    pub fn raw_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let scales = self.raw_scale_vector();
        a.iter()
            .zip(b)
            .zip(&scales)
            .map(|((x, y), s)| ((x - y) * s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn decode_group(span: &GroupSpan, block: &[f64]) -> DecodedValue {
    const PURE_TOL: f64 = 1e-9;
    let sum: f64 = block.iter().sum();
    let all_binary = block.iter().all(|&v| v.abs() <= PURE_TOL || (v - 1.0).abs() <= PURE_TOL);
    if all_binary {
        let ones: Vec<usize> = (0..block.len()).filter(|&i| (block[i] - 1.0).abs() <= PURE_TOL).collect();
        match ones.len() {
            0 if span.optional => return DecodedValue::Empty,
            1 => return DecodedValue::Level(span.levels[ones[0]].clone()),
            _ => {}
        }
    }
    let in_unit = block.iter().all(|&v| (-PURE_TOL..=1.0 + PURE_TOL).contains(&v));
    let sum_ok = if span.optional { sum <= 1.0 + 1e-9 } else { (sum - 1.0).abs() <= 1e-9 };
    let weights = span.levels.iter().cloned().zip(block.iter().copied()).collect();
    DecodedValue::Mixture { weights, non_simplex: !(in_unit && sum_ok) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureDecl;

    fn age_sex() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureDecl::continuous("age"),
            FeatureDecl::categorical("sex", &["F", "M"]),
        ])
        .unwrap()
    }

    fn row(age: f64, sex: &str) -> RawRow {
        vec![RawValue::Number(age), RawValue::Level(sex.into())]
    }

    #[test]
    fn width_and_group_span_for_age_sex() {
        let layout = build_layout(&age_sex(), ScalerKind::ZScore, &[row(30.0, "F"), row(50.0, "M")]).unwrap();
        assert_eq!(layout.width(), 3);
        assert_eq!(layout.groups[0].range(), 1..3);
        assert_eq!(layout.column_labels(), vec!["age", "sex=F", "sex=M"]);
    }

    #[test]
    fn constant_column_gets_unit_scale() {
        let rows = vec![row(40.0, "F"), row(40.0, "M"), row(40.0, "F")];
        let layout = build_layout(&age_sex(), ScalerKind::ZScore, &rows).unwrap();
        assert_eq!(layout.numeric[0].scale, ColumnScale { offset: 40.0, scale: 1.0 });
        for r in &rows {
            assert_eq!(layout.encode_row(r).unwrap()[0], 0.0);
        }
        let mm = build_layout(&age_sex(), ScalerKind::MinMax, &rows).unwrap();
        assert_eq!(mm.numeric[0].scale.scale, 1.0);
    }

    #[test]
    fn one_hot_encoding_of_a_row() {
        let layout = build_layout(&age_sex(), ScalerKind::None, &[row(40.0, "F")]).unwrap();
        assert_eq!(layout.encode_row(&row(40.0, "F")).unwrap(), vec![40.0, 1.0, 0.0]);
    }

    #[test]
    fn half_and_half_mixture_decodes_legibly() {
        let layout = build_layout(&age_sex(), ScalerKind::None, &[row(40.0, "F")]).unwrap();
        let decoded = layout.decode_point(&[40.0, 0.5, 0.5]).unwrap();
        let sex = decoded.get("sex").unwrap();
        assert_eq!(sex.to_string(), "50% F / 50% M");
        assert!(matches!(sex, DecodedValue::Mixture { non_simplex: false, .. }));
    }

    #[test]
    fn non_simplex_weights_pass_through_with_flag() {
        let layout = build_layout(&age_sex(), ScalerKind::None, &[row(40.0, "F")]).unwrap();
        let decoded = layout.decode_point(&[40.0, 0.2, 0.9]).unwrap();
        match decoded.get("sex").unwrap() {
            DecodedValue::Mixture { weights, non_simplex } => {
                assert!(*non_simplex);
                assert_eq!(weights["F"], 0.2);
                assert_eq!(weights["M"], 0.9);
            }
            other => panic!("expected mixture, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let layout = build_layout(&age_sex(), ScalerKind::None, &[row(40.0, "F")]).unwrap();
        assert!(matches!(layout.decode_point(&[1.0]), Err(SchemaError::DimensionMismatch { .. })));
        assert!(matches!(
            layout.encode_row(&[RawValue::Number(1.0)]),
            Err(SchemaError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert_eq!(build_layout(&age_sex(), ScalerKind::ZScore, &[]), Err(SchemaError::EmptyTrainingSet));
    }
}
