//! Bundled schema files for public datasets.

use crate::schema::{SchemaError, SchemaFile};

pub const ADULT: &str = include_str!("../presets/adult.toml");
pub const FICO: &str = include_str!("../presets/fico.toml");
pub const VACS_SYNTHETIC: &str = include_str!("../presets/vacs_synthetic.toml");

/// Names accepted by [`preset`].
pub const NAMES: [&str; 3] = ["adult", "fico", "vacs_synthetic"];

/// Parsed preset by name.
pub fn preset(name: &str) -> Result<SchemaFile, SchemaError> {
    let text = match name {
        "adult" => ADULT,
        "fico" | "heloc" => FICO,
        "vacs_synthetic" | "vacs" => VACS_SYNTHETIC,
        other => return Err(SchemaError::File(format!("unknown preset `{other}`"))),
    };
    SchemaFile::from_toml_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{build_layout, ScalerKind};

    #[test]
    fn every_preset_parses() {
        for name in NAMES {
            let file = preset(name).unwrap();
            file.domain.validate(&file.schema).unwrap();
        }
    }

    #[test]
    fn adult_layout_width() {
        let file = preset("adult").unwrap();
        let numeric = file.schema.features.iter().filter(|f| !f.kind.is_categorical()).count();
        let levels: usize = file.schema.features.iter().filter_map(|f| f.effective_levels()).map(|l| l.len()).sum();
        assert_eq!(numeric, 5);
        assert_eq!(numeric + levels, 104);
        let _ = build_layout;
        let _ = ScalerKind::ZScore;
    }
}
