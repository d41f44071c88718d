//! Projects one query onto the convex hull of a handful of training rows and
//! checks the optimality conditions of the answer.
//!
//! ```text
//! cargo run --example project_point
//! ```

use std::sync::Arc;

use hullaudit::prelude::*;

fn main() {
    let schema = FeatureSchema::new(vec![
        FeatureDecl::continuous("income"),
        FeatureDecl::integer("age"),
        FeatureDecl::categorical("tenure", &["own", "rent"]),
    ])
    .unwrap();
    let raw = |income: f64, age: f64, tenure: &str| {
        vec![RawValue::Number(income), RawValue::Number(age), RawValue::Level(tenure.into())]
    };
    let train_rows = vec![
        raw(30.0, 25.0, "rent"),
        raw(45.0, 32.0, "rent"),
        raw(60.0, 41.0, "own"),
        raw(80.0, 55.0, "own"),
        raw(52.0, 47.0, "own"),
        raw(38.0, 29.0, "rent"),
    ];
    let layout = Arc::new(build_layout(&schema, ScalerKind::ZScore, &train_rows).unwrap());
    let train = EncodedDataset::from_raw_rows(layout.clone(), &train_rows, (0..train_rows.len()).collect()).unwrap();

    let config = SolverConfig::default();
    for (label, query) in [("inside", raw(56.0, 44.0, "own")), ("outside", raw(95.0, 30.0, "rent"))] {
        let x = layout.encode_row(&query).unwrap();
        let problem = ProjectionProblem::new(&x, &train, &config);
        let result = project_continuous(&problem).unwrap();
        let kkt = verify_kkt(&result, &problem);
        println!("{label} query: {}", layout.decode_point(&x).unwrap());
        println!("  projection: {}", layout.decode_point(&result.point).unwrap());
        println!(
            "  status {:?}, scaled distance {:.4}, raw distance {:.4}, {} via {}",
            result.status, result.distance, result.raw_distance, result.iterations, result.algorithm
        );
        let support: Vec<String> = result.weights.iter().map(|(i, w)| format!("row {i}: {w:.3}")).collect();
        println!("  support: {}", support.join(", "));
        println!("  optimality check passed: {} (certificate {:.2e})", kkt.passed, kkt.certificate);
    }
}
