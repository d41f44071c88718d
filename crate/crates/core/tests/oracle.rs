mod common;

use std::sync::Arc;
use std::time::Instant;

use common::*;
use hullaudit::discrete::{exact_enumeration, homotopy_project, DEFAULT_SCHEDULE};
use hullaudit::prelude::*;
use rand::Rng;

#[test]
fn projection_matches_support_enumeration_on_small_instances() {
    let start = Instant::now();
    let mut rng = rng(2024);
    for case in 0..100 {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=4);
        let pts = random_points(&mut rng, n, d);
        let ds = continuous_dataset(&pts);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let oracle = brute_force_distance(&pts, &x);
        for algorithm in [Algorithm::Auto, Algorithm::GradientProjection, Algorithm::FrankWolfe, Algorithm::Dual] {
            let config = SolverConfig::default().with_algorithm(algorithm);
            let r = project_continuous(&ProjectionProblem::new(&x, &ds, &config)).unwrap();
            assert!(
                (r.distance - oracle).abs() <= 1e-4,
                "case {case} ({algorithm}): solver {} oracle {oracle}",
                r.distance
            );
        }
    }
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn discrete_projection_matches_profile_oracle() {
    let mut rng = rng(77);
    for case in 0..100 {
        let levels = [rng.random_range(2..=3), rng.random_range(2..=3)];
        let n = rng.random_range(1..=12);
        let m = mixed_dataset(&mut rng, n, 2, &levels, ScalerKind::None);
        let q = random_mixed_row(&mut rng, 2, &levels);
        let x = m.train.layout.encode_row(&q).unwrap();
        let fixed = [rng.random_bool(0.3), false];
        let mut domain = DomainSpec::uniform(&m.schema, GroupMode::DiscreteExclusive { complete: true });
        if fixed[0] {
            domain = domain.with_mode("c0", GroupMode::FixedToQuery);
        }
        let config = SolverConfig::default();
        let oracle = discrete_oracle(&m.train, &x, &fixed);
        match (exact_enumeration(&x, &m.train, &domain, &config, true), oracle) {
            (Ok((r, _)), Some(o)) => assert!((r.distance - o).abs() <= 1e-6, "case {case}: {} vs {o}", r.distance),
            (Err(hullaudit::solver::SolveError::InfeasibleDomain), None) => {}
            (got, want) => panic!("case {case}: solver {got:?}, oracle {want:?}"),
        }
    }
}

/// Two groups whose relaxed optimum splits mass evenly, so rounding each
/// group to its heaviest level lands on a profile no training row has.
fn adversarial() -> (FeatureSchema, EncodedDataset, Vec<f64>) {
    let schema = FeatureSchema::new(vec![
        FeatureDecl::continuous("x"),
        FeatureDecl::categorical("a", &["a1", "a2"]),
        FeatureDecl::categorical("b", &["b1", "b2"]),
    ])
    .unwrap();
    let row = |x: f64, a: &str, b: &str| vec![RawValue::Number(x), RawValue::Level(a.into()), RawValue::Level(b.into())];
    let raw = vec![row(0.0, "a1", "b2"), row(0.0, "a2", "b1"), row(3.0, "a1", "b1")];
    let layout = Arc::new(build_layout(&schema, ScalerKind::None, &raw).unwrap());
    let train = EncodedDataset::from_raw_rows(layout.clone(), &raw, vec![0, 1, 2]).unwrap();
    let x = layout.encode_row(&row(0.0, "a1", "b1")).unwrap();
    (schema, train, x)
}

#[test]
fn adversarial_homotopy_is_dominated_and_certified() {
    let (schema, train, x) = adversarial();
    let domain = DomainSpec::uniform(&schema, GroupMode::DiscreteExclusive { complete: true });
    let config = SolverConfig::default();
    let (exact, _) = exact_enumeration(&x, &train, &domain, &config, true).unwrap();
    let (homotopy, trace) = homotopy_project(&x, &train, &domain, &config, &DEFAULT_SCHEDULE).unwrap();
    let h = trace.homotopy.expect("homotopy trace");

    // Exact: switch one group (cost sqrt 2) at x = 0, or keep both groups and move x by 3.
    assert!((exact.distance - 2f64.sqrt()).abs() < 1e-9);
    assert!(homotopy.distance >= exact.distance - 1e-9);
    assert!(homotopy.certified);
    assert!(h.relaxed_distance <= exact.distance + 1e-9);
    assert!((h.gap - (homotopy.distance - h.relaxed_distance)).abs() < 1e-9);
    assert_eq!(h.schedule, DEFAULT_SCHEDULE.to_vec());
    let oracle = discrete_oracle(&train, &x, &[false, false]).unwrap();
    assert!((oracle - exact.distance).abs() < 1e-9);
}

#[test]
fn homotopy_falls_back_when_rounding_hits_an_absent_profile() {
    // Each row differs from the query in one group; the relaxed optimum
    // weighs them equally, so every group's heaviest level is the query's
    // and the rounded profile (a1, b1, c1) has no training row. A schedule
    // without penalty stages rounds the relaxed optimum directly.
    let schema = FeatureSchema::new(vec![
        FeatureDecl::continuous("x"),
        FeatureDecl::categorical("a", &["a1", "a2"]),
        FeatureDecl::categorical("b", &["b1", "b2"]),
        FeatureDecl::categorical("c", &["c1", "c2"]),
    ])
    .unwrap();
    let row = |a: &str, b: &str, c: &str| {
        vec![RawValue::Number(0.0), RawValue::Level(a.into()), RawValue::Level(b.into()), RawValue::Level(c.into())]
    };
    let raw = vec![row("a1", "b1", "c2"), row("a1", "b2", "c1"), row("a2", "b1", "c1")];
    let layout = Arc::new(build_layout(&schema, ScalerKind::None, &raw).unwrap());
    let train = EncodedDataset::from_raw_rows(layout.clone(), &raw, vec![0, 1, 2]).unwrap();
    let x = layout.encode_row(&row("a1", "b1", "c1")).unwrap();
    let domain = DomainSpec::uniform(&schema, GroupMode::DiscreteExclusive { complete: true });

    let config = SolverConfig::default();
    let (r, trace) = homotopy_project(&x, &train, &domain, &config, &[0.0]).unwrap();
    let h = trace.homotopy.unwrap();
    assert!(h.fallback_used, "rounded to {:?}", h.rounded_profile);
    assert!(!train.profiles.contains(h.rounded_profile.as_ref().unwrap()));
    assert!((r.distance - 2f64.sqrt()).abs() < 1e-9);
    assert!(r.certified);
    assert!((h.relaxed_distance - (2.0f64 / 3.0).sqrt()).abs() < 1e-6);

    let (full, _) = homotopy_project(&x, &train, &domain, &config, &DEFAULT_SCHEDULE).unwrap();
    assert!((full.distance - 2f64.sqrt()).abs() < 1e-9);
}
