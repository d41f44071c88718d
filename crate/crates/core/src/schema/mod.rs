//! Feature space declaration, the numeric encoding used by the solvers, and
//! the domain restrictions applied to projections.
//!
//! A [`FeatureSchema`] lists the raw features in order. [`build_layout`] turns
//! it into an [`EncodingLayout`]: continuous and integer features become one
//! scaled column each, categorical features expand into one 0/1 column per
//! level. The [`DomainSpec`] decides, per categorical group, whether a
//! projected point may mix levels, must pick a single level, or must keep the
//! query's level.

mod domain;
mod file;
mod layout;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use domain::{DomainSpec, GroupMode};
pub use file::{CsvOptions, SchemaFile};
pub use layout::{
    build_layout, ColumnInfo, ColumnScale, DecodedRow, DecodedValue, EncodingLayout, GroupSpan,
    NumericColumn, ScalerKind, Slot,
};
pub(crate) use layout::fmt_number;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("schema declares no features")]
    NoFeatures,
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("categorical feature `{0}` needs at least two levels")]
    TooFewLevels(String),
    #[error("categorical feature `{feature}` lists level `{level}` twice")]
    DuplicateLevel { feature: String, level: String },
    #[error("feature `{0}` has lower bound above upper bound")]
    InvertedBounds(String),
    #[error("missing-value policy `as_level` is only legal for categorical features (`{0}`)")]
    AsLevelOnNumeric(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` is not categorical")]
    NotCategorical(String),
    #[error("training set is empty after applying the missing-value policy")]
    EmptyTrainingSet,
    #[error("expected a row of {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("value for `{feature}` does not match its declared kind")]
    KindMismatch { feature: String },
    #[error("level `{level}` is not declared for `{feature}`")]
    UnknownLevel { feature: String, level: String },
    #[error("invalid schema file: {0}")]
    File(String),
}

/// Kind and bounds of a single raw feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
    Integer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<i64>,
    },
    Categorical {
        levels: Vec<String>,
        /// Rows may leave the group empty (every one-hot coordinate zero).
        #[serde(default)]
        optional: bool,
    },
}

impl FeatureKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }

    /// Lower and upper bound as reals, for numeric kinds.
    pub fn bounds(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            FeatureKind::Continuous { lower, upper } => (lower, upper),
            FeatureKind::Integer { lower, upper } => {
                (lower.map(|v| v as f64), upper.map(|v| v as f64))
            }
            FeatureKind::Categorical { .. } => (None, None),
        }
    }
}

/// What to do with a missing value in a feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    DropRow,
    /// Treat the missing token as its own level (categorical only).
    AsLevel(String),
}

impl fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MissingPolicy::DropRow => write!(f, "drop_row"),
            MissingPolicy::AsLevel(level) => write!(f, "as_level({level})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDecl {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
}

impl FeatureDecl {
    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Continuous { lower: None, upper: None },
            missing_policy: MissingPolicy::DropRow,
        }
    }

    pub fn integer(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Integer { lower: None, upper: None },
            missing_policy: MissingPolicy::DropRow,
        }
    }

    pub fn categorical<S: AsRef<str>>(name: &str, levels: &[S]) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Categorical {
                levels: levels.iter().map(|l| l.as_ref().to_owned()).collect(),
                optional: false,
            },
            missing_policy: MissingPolicy::DropRow,
        }
    }

    pub fn with_bounds(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        match &mut self.kind {
            FeatureKind::Continuous { lower: l, upper: u } => {
                *l = lower;
                *u = upper;
            }
            FeatureKind::Integer { lower: l, upper: u } => {
                *l = lower.map(|v| v as i64);
                *u = upper.map(|v| v as i64);
            }
            FeatureKind::Categorical { .. } => {}
        }
        self
    }

    pub fn with_missing_policy(mut self, policy: MissingPolicy) -> Self {
        self.missing_policy = policy;
        self
    }

    pub fn optional(mut self) -> Self {
        if let FeatureKind::Categorical { optional, .. } = &mut self.kind {
            *optional = true;
        }
        self
    }

    /// Declared levels plus the missing-value level, if the policy adds one.
    pub fn effective_levels(&self) -> Option<Vec<String>> {
        match &self.kind {
            FeatureKind::Categorical { levels, .. } => {
                let mut out = levels.clone();
                if let MissingPolicy::AsLevel(extra) = &self.missing_policy {
                    if !out.contains(extra) {
                        out.push(extra.clone());
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }
}

/// Ordered feature declarations. The target column, if named, is never part
/// of the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_column: Option<String>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDecl>) -> Result<Self, SchemaError> {
        let schema = Self { features, target_column: None };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_target(mut self, target: &str) -> Self {
        self.target_column = Some(target.to_owned());
        self
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.features.is_empty() {
            return Err(SchemaError::NoFeatures);
        }
        let mut names = HashSet::new();
        for feat in &self.features {
            if !names.insert(feat.name.as_str()) {
                return Err(SchemaError::DuplicateFeature(feat.name.clone()));
            }
            match &feat.kind {
                FeatureKind::Categorical { levels, .. } => {
                    if levels.len() < 2 {
                        return Err(SchemaError::TooFewLevels(feat.name.clone()));
                    }
                    let mut seen = HashSet::new();
                    for level in levels {
                        if !seen.insert(level.as_str()) {
                            return Err(SchemaError::DuplicateLevel {
                                feature: feat.name.clone(),
                                level: level.clone(),
                            });
                        }
                    }
                }
                kind => {
                    if let (Some(lo), Some(hi)) = kind.bounds() {
                        if lo > hi {
                            return Err(SchemaError::InvertedBounds(feat.name.clone()));
                        }
                    }
                    if matches!(feat.missing_policy, MissingPolicy::AsLevel(_)) {
                        return Err(SchemaError::AsLevelOnNumeric(feat.name.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn categorical_names(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| f.kind.is_categorical())
            .map(|f| f.name.as_str())
            .collect()
    }
}

/// One raw cell value, already parsed according to the feature kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Level(String),
    Missing,
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Number(v) => write!(f, "{v}"),
            RawValue::Level(l) => write!(f, "{l}"),
            RawValue::Missing => write!(f, "NA"),
        }
    }
}

/// A raw row, one value per schema feature in schema order.
pub type RawRow = Vec<RawValue>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_names() {
        let err = FeatureSchema::new(vec![
            FeatureDecl::continuous("age"),
            FeatureDecl::continuous("age"),
        ])
        .unwrap_err();
        assert_eq!(err, SchemaError::DuplicateFeature("age".into()));
    }

    #[test]
    fn rejects_single_level_and_repeated_levels() {
        assert!(matches!(
            FeatureSchema::new(vec![FeatureDecl::categorical("sex", &["F"])]),
            Err(SchemaError::TooFewLevels(_))
        ));
        assert!(matches!(
            FeatureSchema::new(vec![FeatureDecl::categorical("sex", &["F", "F"])]),
            Err(SchemaError::DuplicateLevel { .. })
        ));
    }

    #[test]
    fn rejects_inverted_bounds_and_as_level_on_numeric() {
        let f = FeatureDecl::continuous("age").with_bounds(Some(10.0), Some(1.0));
        assert!(matches!(FeatureSchema::new(vec![f]), Err(SchemaError::InvertedBounds(_))));
        let f = FeatureDecl::integer("n").with_missing_policy(MissingPolicy::AsLevel("U".into()));
        assert!(matches!(FeatureSchema::new(vec![f]), Err(SchemaError::AsLevelOnNumeric(_))));
        assert_eq!(FeatureSchema::new(vec![]), Err(SchemaError::NoFeatures));
    }

    #[test]
    fn as_level_adds_missing_level_once() {
        let f = FeatureDecl::categorical("wc", &["A", "B"])
            .with_missing_policy(MissingPolicy::AsLevel("Unknown".into()));
        assert_eq!(f.effective_levels().unwrap(), vec!["A", "B", "Unknown"]);
    }
}
