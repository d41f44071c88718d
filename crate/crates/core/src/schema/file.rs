//! Declarative schema files (TOML).
//!
//! ```toml
//! target_column = "income"
//!
//! [csv]
//! na_token = "?"
//!
//! [[features]]
//! name = "age"
//! kind = "integer"
//! lower = 0
//! upper = 120
//!
//! [[features]]
//! name = "sex"
//! kind = "categorical"
//! levels = ["Female", "Male"]
//!
//! [domain]
//! default_mode = "relaxed"
//! path_groups = ["sex"]
//!
//! [domain.groups]
//! sex = "discrete"
//!
//! [domain.enforce_bounds]
//! age = true
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DomainSpec, FeatureDecl, FeatureSchema, GroupMode, SchemaError};

/// CSV dialect options carried by a schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub na_token: String,
    pub has_header: bool,
    /// Column names for header-less files, in file order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column_names: Option<Vec<String>>,
    /// Lines starting with this character are skipped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comment: Option<char>,
    /// Drop one trailing `.` from every cell (Adult test-file labels).
    pub strip_trailing_period: bool,
    /// Numeric sentinel codes (e.g. -7, -8, -9).
    pub special_codes: Vec<f64>,
    /// Treat `special_codes` as missing instead of raw numbers.
    pub special_codes_as_missing: bool,
    /// Name of the bundled preset this dialect came from, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            na_token: "?".into(),
            has_header: true,
            column_names: None,
            comment: None,
            strip_trailing_period: false,
            special_codes: Vec::new(),
            special_codes_as_missing: false,
            preset: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct DomainSection {
    default_mode: Option<String>,
    path_groups: Vec<String>,
    groups: BTreeMap<String, String>,
    enforce_bounds: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSchemaFile {
    #[serde(default)]
    target_column: Option<String>,
    #[serde(default)]
    csv: CsvOptions,
    features: Vec<FeatureDecl>,
    #[serde(default)]
    domain: DomainSection,
}

/// A parsed schema file: the schema, its domain, and its CSV dialect.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaFile {
    pub schema: FeatureSchema,
    pub domain: DomainSpec,
    pub csv: CsvOptions,
}

impl SchemaFile {
    pub fn from_toml_str(text: &str) -> Result<Self, SchemaError> {
        let raw: RawSchemaFile = toml::from_str(text).map_err(|e| SchemaError::File(e.to_string()))?;
        let schema = FeatureSchema { features: raw.features, target_column: raw.target_column };
        schema.validate()?;

        let default_mode = match raw.domain.default_mode.as_deref() {
            Some(s) => s.parse::<GroupMode>().map_err(SchemaError::File)?,
            None => GroupMode::RelaxedMixture,
        };
        let mut domain = DomainSpec::uniform(&schema, default_mode);
        for (group, mode) in &raw.domain.groups {
            let mode: GroupMode = mode.parse().map_err(SchemaError::File)?;
            domain.modes.insert(group.clone(), mode);
        }
        domain.enforce_bounds = raw.domain.enforce_bounds;
        domain.path_groups = raw.domain.path_groups;
        domain.validate(&schema)?;
        Ok(Self { schema, domain, csv: raw.csv })
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SchemaError::File(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}
