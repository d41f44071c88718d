use std::fmt::Write;

use super::{SampleRecord, SampleStatus};
use crate::schema::fmt_number;

/// Plain-text account of one record: status, distances, the query next to
/// its projection with deltas sorted by relative size, and the support (or a
/// suppression notice).
pub fn explain_sample(record: &SampleRecord, redact: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sample {}", record.row_id);
    match record.status {
        SampleStatus::Inside => {
            let _ = writeln!(out, "status: inside (interpolation; no deltas)");
            return out;
        }
        SampleStatus::OutsidePath => {
            let _ = writeln!(out, "status: outside (extrapolation; a continuous path to the hull exists)");
        }
        SampleStatus::OutsideNoPath => {
            let _ = writeln!(out, "status: outside, no continuous path (no training row shares its path-group levels)");
        }
    }
    let _ = writeln!(
        out,
        "distance: {} scaled, {} raw{}",
        fmt_number(record.distance),
        fmt_number(record.raw_distance),
        if record.certified { "" } else { " (not certified)" }
    );
    if let Some(e) = &record.error {
        let _ = writeln!(out, "error: {e}");
    }

    let mut rows: Vec<&super::FeatureDelta> = record.per_feature_delta.iter().collect();
    // Numeric features by relative change, then categorical by mass moved.
    rows.sort_by(|a, b| {
        let key = |d: &super::FeatureDelta| match (d.relative_change, d.mass_moved) {
            (Some(r), _) => (0, -r),
            (None, Some(m)) => (1, -m),
            _ => (2, 0.0),
        };
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let width = rows.iter().map(|d| d.feature.len()).max().unwrap_or(7).max(7);
    let _ = writeln!(out, "{:<width$}  {:>14}  {:>24}  {:>12}  {:>9}", "feature", "query", "projection", "delta", "change");
    for d in rows {
        let delta = d.delta.map(|v| format!("{v:+.3}")).unwrap_or_default();
        let change = match (d.relative_change, d.mass_moved) {
            (Some(r), _) => format!("{:.1}%", 100.0 * r),
            (None, Some(m)) if m > 1e-9 => format!("{:.1}% moved", 100.0 * m),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:>24}  {:>12}  {:>9}",
            d.feature,
            d.query.to_string(),
            d.projected.to_string(),
            delta,
            change
        );
    }

    if redact || record.support_suppressed {
        let _ = writeln!(out, "support: suppressed");
    } else if let Some(support) = &record.support {
        let parts: Vec<String> = support.iter().map(|s| format!("row {} ({:.3})", s.train_row, s.weight)).collect();
        let _ = writeln!(out, "support: {}", parts.join(", "));
    }
    out
}
