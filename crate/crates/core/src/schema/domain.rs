use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FeatureSchema, SchemaError};

/// How a categorical group may appear in a projected point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GroupMode {
    /// Group coordinates must equal the query's.
    FixedToQuery,
    /// Each coordinate in {0,1}. With `complete` the group sums to exactly
    /// one, otherwise to at most one.
    DiscreteExclusive {
        #[serde(default = "default_true")]
        complete: bool,
    },
    /// Coordinates in [0,1], group sum kept.
    RelaxedMixture,
}

fn default_true() -> bool {
    true
}

impl GroupMode {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, GroupMode::RelaxedMixture)
    }
}

impl fmt::Display for GroupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupMode::FixedToQuery => f.write_str("fixed"),
            GroupMode::DiscreteExclusive { complete: true } => f.write_str("discrete"),
            GroupMode::DiscreteExclusive { complete: false } => f.write_str("discrete_optional"),
            GroupMode::RelaxedMixture => f.write_str("relaxed"),
        }
    }
}

impl std::str::FromStr for GroupMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" | "fixed_to_query" => Ok(GroupMode::FixedToQuery),
            "discrete" | "discrete_exclusive" => Ok(GroupMode::DiscreteExclusive { complete: true }),
            "discrete_optional" => Ok(GroupMode::DiscreteExclusive { complete: false }),
            "relaxed" | "relaxed_mixture" => Ok(GroupMode::RelaxedMixture),
            other => Err(format!("unknown group mode `{other}`")),
        }
    }
}

/// The declared domain: one mode per categorical group, bound enforcement
/// per numeric feature, and the groups that define a "continuous path".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub modes: BTreeMap<String, GroupMode>,
    #[serde(default)]
    pub enforce_bounds: BTreeMap<String, bool>,
    /// Groups a query must share with at least one training row for a
    /// continuous path to the hull to exist.
    #[serde(default)]
    pub path_groups: Vec<String>,
}

impl DomainSpec {
    /// Every categorical group gets `mode`. For `DiscreteExclusive`, the
    /// completeness flag follows the schema: optional groups allow a sum
    /// below one.
    pub fn uniform(schema: &FeatureSchema, mode: GroupMode) -> Self {
        let mut modes = BTreeMap::new();
        for feat in &schema.features {
            if let super::FeatureKind::Categorical { optional, .. } = feat.kind {
                let m = match mode {
                    GroupMode::DiscreteExclusive { .. } => GroupMode::DiscreteExclusive { complete: !optional },
                    other => other,
                };
                modes.insert(feat.name.clone(), m);
            }
        }
        Self { modes, enforce_bounds: BTreeMap::new(), path_groups: Vec::new() }
    }

    pub fn relaxed(schema: &FeatureSchema) -> Self {
        Self::uniform(schema, GroupMode::RelaxedMixture)
    }

    pub fn with_mode(mut self, group: &str, mode: GroupMode) -> Self {
        self.modes.insert(group.to_owned(), mode);
        self
    }

    pub fn with_path_groups<S: AsRef<str>>(mut self, groups: &[S]) -> Self {
        self.path_groups = groups.iter().map(|g| g.as_ref().to_owned()).collect();
        self
    }

    pub fn mode(&self, group: &str) -> GroupMode {
        self.modes.get(group).copied().unwrap_or(GroupMode::RelaxedMixture)
    }

    pub fn has_discrete(&self) -> bool {
        self.modes.values().any(GroupMode::is_discrete)
    }

    pub fn fixed_groups(&self) -> Vec<&str> {
        self.modes
            .iter()
            .filter(|(_, m)| matches!(m, GroupMode::FixedToQuery))
            .map(|(g, _)| g.as_str())
            .collect()
    }

    pub fn bounds_enforced(&self, feature: &str) -> bool {
        self.enforce_bounds.get(feature).copied().unwrap_or(false)
    }

    /// Same domain with every `FixedToQuery` group turned into a complete
    /// `DiscreteExclusive` group.
    pub fn release_fixed(&self) -> Self {
        let mut out = self.clone();
        for mode in out.modes.values_mut() {
            if matches!(mode, GroupMode::FixedToQuery) {
                *mode = GroupMode::DiscreteExclusive { complete: true };
            }
        }
        out
    }

    /// Checks that every categorical group has exactly one mode and that
    /// every name refers to a feature of the right kind.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), SchemaError> {
        for name in self.modes.keys().chain(self.path_groups.iter()) {
            let idx = schema.feature_index(name).ok_or_else(|| SchemaError::UnknownFeature(name.clone()))?;
            if !schema.features[idx].kind.is_categorical() {
                return Err(SchemaError::NotCategorical(name.clone()));
            }
        }
        for feat in &schema.features {
            if feat.kind.is_categorical() && !self.modes.contains_key(&feat.name) {
                return Err(SchemaError::File(format!("no domain mode declared for group `{}`", feat.name)));
            }
        }
        for name in self.enforce_bounds.keys() {
            let idx = schema.feature_index(name).ok_or_else(|| SchemaError::UnknownFeature(name.clone()))?;
            if schema.features[idx].kind.is_categorical() {
                return Err(SchemaError::File(format!("bounds flag on categorical feature `{name}`")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureDecl;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureDecl::continuous("age"),
            FeatureDecl::categorical("sex", &["F", "M"]),
            FeatureDecl::categorical("job", &["a", "b", "c"]).optional(),
        ])
        .unwrap()
    }

    #[test]
    fn uniform_discrete_follows_optional_flag() {
        let d = DomainSpec::uniform(&schema(), GroupMode::DiscreteExclusive { complete: true });
        assert_eq!(d.mode("sex"), GroupMode::DiscreteExclusive { complete: true });
        assert_eq!(d.mode("job"), GroupMode::DiscreteExclusive { complete: false });
        assert!(d.validate(&schema()).is_ok());
    }

    #[test]
    fn validation_catches_missing_and_misnamed_groups() {
        let mut d = DomainSpec::relaxed(&schema());
        d.modes.remove("job");
        assert!(d.validate(&schema()).is_err());
        let d = DomainSpec::relaxed(&schema()).with_mode("age", GroupMode::FixedToQuery);
        assert_eq!(d.validate(&schema()), Err(SchemaError::NotCategorical("age".into())));
        let d = DomainSpec::relaxed(&schema()).with_path_groups(&["nope"]);
        assert_eq!(d.validate(&schema()), Err(SchemaError::UnknownFeature("nope".into())));
    }

    #[test]
    fn mode_parsing_round_trips() {
        for m in [
            GroupMode::FixedToQuery,
            GroupMode::DiscreteExclusive { complete: true },
            GroupMode::DiscreteExclusive { complete: false },
            GroupMode::RelaxedMixture,
        ] {
            assert_eq!(m.to_string().parse::<GroupMode>().unwrap(), m);
        }
    }
}
