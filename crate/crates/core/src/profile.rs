use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::EncodingLayout;

/// Level held by one categorical group in a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSlot {
    Level(u32),
    /// Optional group left empty.
    Empty,
    /// Wildcard (group relaxed or not part of the comparison).
    Any,
}

impl LevelSlot {
    pub fn matches(&self, other: &LevelSlot) -> bool {
        matches!(self, LevelSlot::Any) || matches!(other, LevelSlot::Any) || self == other
    }
}

/// Tuple of level indices, one per categorical group in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoricalProfile {
    pub slots: Vec<LevelSlot>,
}

impl CategoricalProfile {
    pub fn new(slots: Vec<LevelSlot>) -> Self {
        Self { slots }
    }

    /// Keeps the listed groups and turns the others into wildcards.
    pub fn restrict(&self, keep: &[bool]) -> Self {
        Self {
            slots: self
                .slots
                .iter()
                .zip(keep)
                .map(|(s, &k)| if k { *s } else { LevelSlot::Any })
                .collect(),
        }
    }

    pub fn matches(&self, other: &CategoricalProfile) -> bool {
        self.slots.iter().zip(&other.slots).all(|(a, b)| a.matches(b))
    }

    /// Human-readable form using the layout's level names.
    pub fn describe(&self, layout: &EncodingLayout) -> Vec<(String, String)> {
        self.slots
            .iter()
            .zip(&layout.groups)
            .map(|(slot, g)| {
                let value = match slot {
                    LevelSlot::Level(i) => g.levels[*i as usize].clone(),
                    LevelSlot::Empty => "(none)".to_owned(),
                    LevelSlot::Any => "*".to_owned(),
                };
                (g.feature.clone(), value)
            })
            .collect()
    }
}

impl fmt::Display for CategoricalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .slots
            .iter()
            .map(|s| match s {
                LevelSlot::Level(i) => i.to_string(),
                LevelSlot::Empty => "-".into(),
                LevelSlot::Any => "*".into(),
            })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}
