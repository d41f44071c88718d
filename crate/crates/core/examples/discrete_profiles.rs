//! Categorical groups declared discrete: the projection must land on a
//! combination of levels that occurs in training. Compares the exact
//! enumeration with the homotopy heuristic.
//!
//! ```text
//! cargo run --example discrete_profiles
//! ```

use std::sync::Arc;

use hullaudit::discrete::{exact_enumeration, homotopy_project, DEFAULT_SCHEDULE};
use hullaudit::prelude::*;

fn main() {
    let schema = FeatureSchema::new(vec![
        FeatureDecl::continuous("hours"),
        FeatureDecl::categorical("sector", &["public", "private", "self"]),
        FeatureDecl::categorical("shift", &["day", "night"]),
    ])
    .unwrap();
    let raw = |h: f64, sector: &str, shift: &str| {
        vec![RawValue::Number(h), RawValue::Level(sector.into()), RawValue::Level(shift.into())]
    };
    let rows = vec![
        raw(38.0, "public", "day"),
        raw(40.0, "public", "day"),
        raw(45.0, "private", "night"),
        raw(50.0, "private", "night"),
        raw(60.0, "self", "day"),
        raw(20.0, "self", "day"),
    ];
    let layout = Arc::new(build_layout(&schema, ScalerKind::ZScore, &rows).unwrap());
    let train = EncodedDataset::from_raw_rows(layout.clone(), &rows, (0..rows.len()).collect()).unwrap();
    let query = layout.encode_row(&raw(42.0, "public", "night")).unwrap();
    let config = SolverConfig::default();

    let relaxed = DomainSpec::relaxed(&schema);
    let r = project_continuous(&ProjectionProblem::new(&query, &train, &config)).unwrap();
    println!("relaxed:   distance {:.4}  -> {}", r.distance, layout.decode_point(&r.point).unwrap());

    let discrete = relaxed.clone().with_mode("sector", GroupMode::DiscreteExclusive { complete: true }).with_mode(
        "shift",
        GroupMode::DiscreteExclusive { complete: true },
    );
    let (exact, trace) = exact_enumeration(&query, &train, &discrete, &config, true).unwrap();
    println!("exact:     distance {:.4}  -> {}", exact.distance, layout.decode_point(&exact.point).unwrap());
    println!(
        "           {} profiles solved, {} pruned, winner {}",
        trace.profiles_considered,
        trace.profiles_pruned,
        trace.winning_profile.map(|p| format!("{:?}", p.describe(&layout))).unwrap_or_default()
    );

    let (homotopy, trace) = homotopy_project(&query, &train, &discrete, &config, &DEFAULT_SCHEDULE).unwrap();
    println!("homotopy:  distance {:.4}  -> {}", homotopy.distance, layout.decode_point(&homotopy.point).unwrap());
    if let Some(h) = trace.homotopy {
        println!(
            "           relaxed distance {:.4}, gap {:.4}, fallback used: {}",
            h.relaxed_distance, h.gap, h.fallback_used
        );
    }

    let pinned = discrete.with_mode("shift", GroupMode::FixedToQuery);
    let (r, _) = exact_enumeration(&query, &train, &pinned, &config, true).unwrap();
    println!("shift fixed to the query: distance {:.4}  -> {}", r.distance, layout.decode_point(&r.point).unwrap());
}
