#![allow(dead_code)]

//! Randomized properties of the solver, shared by the property tests and the
//! acceptance run. Each takes a seed and draws its own instance.

use std::sync::Arc;

use crate::common::*;
use hullaudit::directions::{cluster_rows, dominant_count, spectrum, ClusterConfig, DirectionsMatrix, SpectrumConfig};
use hullaudit::discrete::{exact_enumeration, homotopy_project, DEFAULT_SCHEDULE};
use hullaudit::prelude::*;
use hullaudit::report::{build_record, explain_sample};
use hullaudit::schema::DecodedValue;
use hullaudit::solver::{certificate, HullView, Membership, RowOutcome, SolveError};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

pub type Property = fn(u64) -> Result<(), TestCaseError>;

pub const ALL: &[(&str, Property)] = &[
    ("weights_lie_on_the_simplex", weights_lie_on_the_simplex),
    ("certificate_bounds_the_variational_inequality", certificate_bounds_the_variational_inequality),
    ("projection_is_no_farther_than_any_hull_point", projection_is_no_farther_than_any_hull_point),
    ("projecting_a_projection_is_a_no_op", projecting_a_projection_is_a_no_op),
    ("dirichlet_combinations_are_inside", dirichlet_combinations_are_inside),
    ("algorithms_agree", algorithms_agree),
    ("exact_enumeration_matches_brute_force", exact_enumeration_matches_brute_force),
    ("exact_never_loses_to_homotopy", exact_never_loses_to_homotopy),
    ("membership_does_not_depend_on_the_scaler", membership_does_not_depend_on_the_scaler),
    ("redacted_outputs_never_name_training_rows", redacted_outputs_never_name_training_rows),
    ("encode_decode_round_trips", encode_decode_round_trips),
    ("spectrum_is_consistent", spectrum_is_consistent),
    ("clustering_ignores_row_order", clustering_ignores_row_order),
];

pub fn config() -> ProptestConfig {
    ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() }
}

/// `(points, query)` with `n` in 1..=25 rows of dimension 1..=6.
fn instance(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(1..=25);
    let d = r.random_range(1..=6);
    let pts = random_points(&mut r, n, d);
    let x = (0..d).map(|_| r.random_range(-2.5..2.5)).collect();
    (pts, x)
}

fn dirichlet(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    let g = Gamma::new(1.0, 1.0).unwrap();
    let w: Vec<f64> = (0..n).map(|_| g.sample(r) + 1e-12).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn combine(pts: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; pts[0].len()];
    for (p, &wi) in pts.iter().zip(w) {
        for (xj, pj) in x.iter_mut().zip(p) {
            *xj += wi * pj;
        }
    }
    x
}


pub fn weights_lie_on_the_simplex(seed: u64) -> Result<(), TestCaseError> {
    let (pts, x) = instance(seed);
    let ds = continuous_dataset(&pts);
    let config = SolverConfig::default();
    let r = project_continuous(&ProjectionProblem::new(&x, &ds, &config)).unwrap();
    let sum: f64 = r.weights.iter().map(|w| w.1).sum();
    prop_assert!((sum - 1.0).abs() <= config.tol_feas);
    prop_assert!(r.weights.iter().all(|w| w.1 >= 0.0 && w.0 < pts.len()));
    let rebuilt = combine(&pts, &{
        let mut dense = vec![0.0; pts.len()];
        for &(i, w) in &r.weights { dense[i] += w; }
        dense
    });
    prop_assert!(dist(&rebuilt, &r.point) <= 1e-10);
    Ok(())
}

pub fn certificate_bounds_the_variational_inequality(seed: u64) -> Result<(), TestCaseError> {
    let (pts, x) = instance(seed);
    let ds = continuous_dataset(&pts);
    let config = SolverConfig::default();
    let r = project_continuous(&ProjectionProblem::new(&x, &ds, &config)).unwrap();
    // Recomputed here: max_i (x - x_h) . (D_i - x_h).
    let worst = pts
        .iter()
        .map(|p| x.iter().zip(&r.point).zip(p).map(|((xi, hi), pi)| (xi - hi) * (pi - hi)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    prop_assert!(r.certified);
    prop_assert!(worst <= config.tol_opt);
    prop_assert!((worst - certificate(&HullView::all(&ds.matrix), &x, &r.point)).abs() <= 1e-12);
    Ok(())
}

pub fn projection_is_no_farther_than_any_hull_point(seed: u64) -> Result<(), TestCaseError> {
    let (pts, x) = instance(seed);
    let ds = continuous_dataset(&pts);
    let r = project_continuous(&ProjectionProblem::new(&x, &ds, &SolverConfig::default())).unwrap();
    let mut r2 = rng(seed ^ 0x5eed);
    for p in &pts {
        prop_assert!(r.distance <= dist(&x, p) + 1e-9);
    }
    for _ in 0..5 {
        let h = combine(&pts, &dirichlet(&mut r2, pts.len()));
        prop_assert!(r.distance <= dist(&x, &h) + 1e-9);
    }
    Ok(())
}

pub fn projecting_a_projection_is_a_no_op(seed: u64) -> Result<(), TestCaseError> {
    let (pts, x) = instance(seed);
    let ds = continuous_dataset(&pts);
    let config = SolverConfig::default();
    let r = project_continuous(&ProjectionProblem::new(&x, &ds, &config)).unwrap();
    let again = project_continuous(&ProjectionProblem::new(&r.point, &ds, &config)).unwrap();
    prop_assert!(again.distance <= config.membership_eps);
    prop_assert_eq!(again.status, Membership::Inside);
    prop_assert!(dist(&again.point, &r.point) <= 1e-6);
    Ok(())
}

pub fn dirichlet_combinations_are_inside(seed: u64) -> Result<(), TestCaseError> {
    let (pts, _) = instance(seed);
    let ds = continuous_dataset(&pts);
    let mut r = rng(seed.wrapping_add(1));
    let x = combine(&pts, &dirichlet(&mut r, pts.len()));
    let res = project_continuous(&ProjectionProblem::new(&x, &ds, &SolverConfig::default())).unwrap();
    prop_assert_eq!(res.status, Membership::Inside, "distance {}", res.distance);
    Ok(())
}

pub fn algorithms_agree(seed: u64) -> Result<(), TestCaseError> {
    let (pts, x) = instance(seed);
    let ds = continuous_dataset(&pts);
    let mut base = SolverConfig { tol_opt: 1e-14, max_iter: 200_000, ..SolverConfig::default() };
    let mut distances = Vec::new();
    for algorithm in [Algorithm::GradientProjection, Algorithm::FrankWolfe, Algorithm::Dual] {
        base.algorithm = algorithm;
        let r = match project_continuous(&ProjectionProblem::new(&x, &ds, &base)) {
            Ok(r) => r,
            Err(SolveError::MaxIterExceeded { best }) => *best,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        distances.push(r.distance);
    }
    prop_assert!((distances[0] - distances[1]).abs() <= 1e-6, "{distances:?}");
    prop_assert!((distances[0] - distances[2]).abs() <= 1e-6, "{distances:?}");
    Ok(())
}

pub fn exact_enumeration_matches_brute_force(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let levels = [r.random_range(2..=3), r.random_range(2..=3)];
    let n_num = r.random_range(1..=2);
    let n = r.random_range(1..=20);
    let m = mixed_dataset(&mut r, n, n_num, &levels, ScalerKind::None);
    let q = random_mixed_row(&mut r, n_num, &levels);
    let x = m.train.layout.encode_row(&q).unwrap();
    let fixed = [r.random_bool(0.25), r.random_bool(0.25)];
    let mut domain = DomainSpec::uniform(&m.schema, GroupMode::DiscreteExclusive { complete: true });
    for (g, &f) in fixed.iter().enumerate() {
        if f {
            domain = domain.with_mode(&format!("c{g}"), GroupMode::FixedToQuery);
        }
    }
    let oracle = discrete_oracle(&m.train, &x, &fixed);
    match (exact_enumeration(&x, &m.train, &domain, &SolverConfig::default(), true), oracle) {
        (Ok((res, _)), Some(o)) => prop_assert!((res.distance - o).abs() <= 1e-6, "{} vs {o}", res.distance),
        (Err(SolveError::InfeasibleDomain), None) => {}
        (got, want) => prop_assert!(false, "solver {got:?}, oracle {want:?}"),
    }
    Ok(())
}

pub fn exact_never_loses_to_homotopy(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let levels = [r.random_range(2..=4), r.random_range(2..=3)];
    let n = r.random_range(2..=20);
    let m = mixed_dataset(&mut r, n, 2, &levels, ScalerKind::None);
    let x = m.train.layout.encode_row(&random_mixed_row(&mut r, 2, &levels)).unwrap();
    let domain = DomainSpec::uniform(&m.schema, GroupMode::DiscreteExclusive { complete: true });
    let config = SolverConfig::default();
    let (exact, _) = exact_enumeration(&x, &m.train, &domain, &config, true).unwrap();
    let (homotopy, trace) = homotopy_project(&x, &m.train, &domain, &config, &DEFAULT_SCHEDULE).unwrap();
    prop_assert!(exact.distance <= homotopy.distance + 1e-9);
    let h = trace.homotopy.unwrap();
    prop_assert!(h.relaxed_distance <= exact.distance + 1e-6);
    Ok(())
}

pub fn membership_does_not_depend_on_the_scaler(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let levels = [r.random_range(2..=3)];
    let n = r.random_range(1..=15);
    let n_num = r.random_range(1..=3);
    let schema = mixed_schema(n_num, &levels);
    let scale: Vec<f64> = (0..n_num).map(|_| 10f64.powf(r.random_range(-2.0..3.0))).collect();
    let mut raw: Vec<Vec<RawValue>> = (0..n).map(|_| random_mixed_row(&mut r, n_num, &levels)).collect();
    for row in &mut raw {
        for (j, s) in scale.iter().enumerate() {
            if let RawValue::Number(v) = &mut row[j] { *v *= s; }
        }
    }
    // Query: a convex combination of rows, or a random point.
    let q = if r.random_bool(0.5) {
        let w = dirichlet(&mut r, n);
        let mut q = raw[r.random_range(0..n)].clone();
        for j in 0..n_num {
            let v: f64 = raw.iter().zip(&w).map(|(row, wi)| match row[j] { RawValue::Number(v) => wi * v, _ => 0.0 }).sum();
            q[j] = RawValue::Number(v);
        }
        q
    } else {
        let mut q = random_mixed_row(&mut r, n_num, &levels);
        for (j, s) in scale.iter().enumerate() {
            if let RawValue::Number(v) = &mut q[j] { *v *= s; }
        }
        q
    };
    let mut statuses = Vec::new();
    let mut paths = Vec::new();
    for scaler in [ScalerKind::None, ScalerKind::MinMax, ScalerKind::ZScore] {
        let layout = Arc::new(build_layout(&schema, scaler, &raw).unwrap());
        let ds = EncodedDataset::from_raw_rows(layout.clone(), &raw, (0..n).collect()).unwrap();
        let x = layout.encode_row(&q).unwrap();
        let config = SolverConfig { membership_eps: 1e-7, ..SolverConfig::default() };
        let res = project_continuous(&ProjectionProblem::new(&x, &ds, &config)).unwrap();
        // Skip queries sitting on the membership threshold in any scaling.
        prop_assume!(res.distance <= 1e-9 || res.distance >= 1e-4);
        statuses.push(res.status);
        paths.push(has_continuous_path(&x, &ds, &["c0"]).unwrap());
    }
    prop_assert!(statuses.windows(2).all(|w| w[0] == w[1]), "{statuses:?}");
    prop_assert!(paths.windows(2).all(|w| w[0] == w[1]));
    Ok(())
}

/// Whether `number` occurs in `text` as a whole number rather than inside
/// the digits of some other value.
fn names_number(text: &str, number: &str) -> bool {
    let numeric = |c: char| c.is_ascii_digit() || c == '.';
    text.match_indices(number).any(|(at, _)| {
        let before = text[..at].chars().next_back();
        let after = text[at + number.len()..].chars().next();
        !before.is_some_and(numeric) && !after.is_some_and(numeric)
    })
}

pub fn redacted_outputs_never_name_training_rows(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let n = r.random_range(2..=12);
    let m = mixed_dataset(&mut r, n, 2, &[3], ScalerKind::ZScore);
    // Distinctive ids so any leak is visible as a substring.
    let ids: Vec<usize> = (0..n).map(|i| 9_100_000 + 7919 * i).collect();
    let train = EncodedDataset::from_matrix(m.train.layout.clone(), m.train.matrix.clone(), ids.clone()).unwrap();
    let x = train.layout.encode_row(&random_mixed_row(&mut r, 2, &[3])).unwrap();
    let res = project_continuous(&ProjectionProblem::new(&x, &train, &SolverConfig::default())).unwrap();
    let probe = EncodedDataset::from_matrix(train.layout.clone(), Matrix::from_rows(&[x.clone()]), vec![0]).unwrap();
    let outcome = RowOutcome {
        index: 0,
        result: Some(res.clone()),
        has_continuous_path: true,
        released_fixed: false,
        trace: None,
        integer_repair: None,
        error: None,
    };
    let record = build_record(&outcome, &train, &probe, 50, true);
    let json = serde_json::to_string(&record).unwrap();
    let text = explain_sample(&record, true);
    prop_assert!(record.support.is_none() && record.support_suppressed);
    prop_assert!(!json.contains("train_row") && !json.contains("\"support\""));
    for id in &ids {
        let id = id.to_string();
        prop_assert!(!names_number(&json, &id) && !names_number(&text, &id), "row id {id} leaked");
    }
    for (_, w) in &res.weights {
        let shown = format!("({w:.3})");
        prop_assert!(!text.contains(&shown));
    }
    prop_assert!(text.contains("suppressed") || record.status == hullaudit::report::SampleStatus::Inside);
    Ok(())
}

pub fn encode_decode_round_trips(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let levels: Vec<usize> = (0..r.random_range(0..=3)).map(|_| r.random_range(2..=5)).collect();
    let n_num = r.random_range(1..=4);
    let n = r.random_range(1..=10);
    let scaler = [ScalerKind::None, ScalerKind::MinMax, ScalerKind::ZScore][r.random_range(0..3)];
    let m = mixed_dataset(&mut r, n, n_num, &levels, scaler);
    let q = random_mixed_row(&mut r, n_num, &levels);
    let x = m.train.layout.encode_row(&q).unwrap();
    let back = m.train.layout.decode_point(&x).unwrap();
    for (orig, (_, dec)) in q.iter().zip(&back.values) {
        match (orig, dec) {
            (RawValue::Number(a), DecodedValue::Number(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0)),
            (RawValue::Level(a), DecodedValue::Level(b)) => prop_assert_eq!(a, b),
            other => prop_assert!(false, "{other:?}"),
        }
    }
    let again = m.train.layout.encode_row(&back.to_raw().unwrap()).unwrap();
    prop_assert!(dist(&again, &x) <= 1e-12 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max)));
    Ok(())
}

pub fn spectrum_is_consistent(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let m = r.random_range(2..=30);
    let d = r.random_range(1..=8);
    let mut rows = random_points(&mut r, m, d);
    if d > 1 && r.random_bool(0.3) {
        for row in &mut rows { row[d - 1] = row[0]; }
    }
    let labels: Vec<String> = (0..d).map(|j| format!("c{j}")).collect();
    let dirs = DirectionsMatrix::from_rows(Matrix::from_rows(&rows), (0..m).collect(), labels);
    let config = SpectrumConfig { clustering: None, ..SpectrumConfig::default() };
    let rep = spectrum(&dirs, &config).unwrap();
    prop_assert_eq!(rep.singular_values.len(), m.min(d));
    prop_assert!(rep.singular_values.windows(2).all(|w| w[0] >= w[1]));
    prop_assert!(rep.singular_values.iter().all(|&s| s >= 0.0));
    prop_assert!(rep.rank <= m.min(d));
    prop_assert!(rep.condition_number >= 1.0);
    prop_assert!(rep.dominant_patterns >= 1 && rep.dominant_patterns <= rep.singular_values.len());
    prop_assert_eq!(rep.dominant_patterns, dominant_count(&rep.singular_values, config.energy_threshold));
    // Frobenius norm equals the root sum of squared singular values.
    let fro: f64 = rows.iter().flatten().map(|v| v * v).sum::<f64>();
    let sv: f64 = rep.singular_values.iter().map(|s| s * s).sum();
    prop_assert!((fro - sv).abs() <= 1e-9 * fro.max(1.0), "{fro} vs {sv}: {:?} m {m} d {d}", rep.singular_values);
    Ok(())
}

pub fn clustering_ignores_row_order(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let m = r.random_range(4..=30);
    let d = r.random_range(1..=4);
    let rows = random_points(&mut r, m, d);
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut r);
    let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
    let config = ClusterConfig { k_max: 4, restarts: 2, ..ClusterConfig::default() };
    let a = cluster_rows(&Matrix::from_rows(&rows), &config);
    let b = cluster_rows(&Matrix::from_rows(&shuffled), &config);
    match (a, b) {
        (Ok(a), Ok(b)) => {
            prop_assert_eq!(a.k, b.k);
            prop_assert!((a.silhouette - b.silhouette).abs() <= 1e-9);
            let mut sa = a.sizes.clone();
            let mut sb = b.sizes.clone();
            sa.sort_unstable();
            sb.sort_unstable();
            prop_assert_eq!(sa, sb);
            for (pos, &orig) in perm.iter().enumerate() {
                for (pos2, &orig2) in perm.iter().enumerate() {
                    let same_a = a.assignments[orig] == a.assignments[orig2];
                    let same_b = b.assignments[pos] == b.assignments[pos2];
                    prop_assert_eq!(same_a, same_b);
                }
            }
        }
        (Err(_), Err(_)) => {}
        (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
    }
    Ok(())
}
