mod common;

use common::*;
use hullaudit::directions::{
    build_directions, cluster_rows, condition_number, dominant_count, redundant_features, spectrum, ClusterConfig,
    DirectionsError, DirectionsMatrix, SpectrumConfig,
};
use hullaudit::prelude::*;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn labels(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("c{j}")).collect()
}

fn gaussian(rng: &mut rand_chacha::ChaCha8Rng, m: usize, d: usize) -> Matrix {
    let n = Normal::new(0.0, 1.0).unwrap();
    Matrix::from_vec(m, d, (0..m * d).map(|_| n.sample(rng)).collect())
}

/// `m x d` matrix with prescribed singular values and random singular
/// vectors.
fn with_spectrum(rng: &mut rand_chacha::ChaCha8Rng, m: usize, values: &[f64]) -> Matrix {
    let d = values.len();
    let orth = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| {
        let g = gaussian(rng, k, d);
        DMatrix::from_row_slice(k, d, g.as_slice()).qr().q()
    };
    let u = orth(rng, m);
    let w = orth(rng, d);
    let a = u * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values)) * w.transpose();
    Matrix::from_vec(m, d, (0..m).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect())
}

#[test]
fn condition_number_of_a_known_spectrum() {
    let mut rng = rng(10);
    let values = [1e3, 40.0, 10.0, 1.0];
    let v = with_spectrum(&mut rng, 30, &values);
    let kappa = condition_number(&v, None);
    assert!((kappa / 1e3 - 1.0).abs() < 1e-9, "kappa {kappa}");

    let dirs = DirectionsMatrix::from_rows(v, (0..30).collect(), labels(4));
    let report = spectrum(&dirs, &SpectrumConfig { clustering: None, ..SpectrumConfig::default() }).unwrap();
    assert_eq!(report.rank, 4);
    assert!(report.full_rank);
    for (got, want) in report.singular_values.iter().zip(values) {
        assert!((got / want - 1.0).abs() < 1e-9);
    }
    // 1e6 of 1e6 + 1600 + 100 + 1 is over 99.8% of the energy.
    assert_eq!(report.dominant_patterns, 1);
    assert_eq!(report.patterns.len(), 1);
}

#[test]
fn dominant_count_thresholds() {
    assert_eq!(dominant_count(&[3.0, 2.0, 1.0], 0.5), 1);
    assert_eq!(dominant_count(&[3.0, 2.0, 1.0], 0.9), 2);
    assert_eq!(dominant_count(&[3.0, 2.0, 1.0], 1.0), 3);
    assert_eq!(dominant_count(&[0.0, 0.0], 0.95), 0);
}

#[test]
fn a_duplicated_column_costs_one_rank_and_is_flagged() {
    let mut rng = rng(11);
    let mut v = gaussian(&mut rng, 50, 5);
    for i in 0..50 {
        let a = v.row(i)[1];
        v.row_mut(i)[4] = a;
    }
    let dirs = DirectionsMatrix::from_rows(v.clone(), (0..50).collect(), labels(5));
    let config = SpectrumConfig { clustering: None, drop_columns: vec!["c4".into()], ..SpectrumConfig::default() };
    let report = spectrum(&dirs, &config).unwrap();
    assert_eq!(report.rank, 4);
    assert!(!report.full_rank);
    let dropped = report.dropped.unwrap();
    assert_eq!(dropped.rank, 4);

    let last = &redundant_features(&v, &labels(5), 1, None)[0];
    assert!(last.label == "c1" || last.label == "c4", "flagged {}", last.label);
}

#[test]
fn a_nearly_collinear_column_is_found_by_pivoted_qr() {
    let mut rng = rng(12);
    let mut v = gaussian(&mut rng, 200, 6);
    for i in 0..200 {
        let r = v.row(i).to_vec();
        v.row_mut(i)[5] = 0.5 * r[0] - 2.0 * r[2] + 1e-8 * rng.random_range(-1.0..1.0);
    }
    let before = condition_number(&v, None);
    assert!(before > 1e7, "kappa {before}");
    let top2: Vec<usize> = redundant_features(&v, &labels(6), 2, None).iter().map(|r| r.column).collect();
    assert!(top2.iter().any(|c| [0, 2, 5].contains(c)), "top-2 {top2:?}");
    let keep: Vec<usize> = (0..5).collect();
    let after = condition_number(&v.select_columns(&keep), None);
    assert!(after < 100.0, "kappa after drop {after}");
}

#[test]
fn kmeans_separates_two_direction_bundles() {
    let mut rng = rng(13);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut data = Vec::new();
    for i in 0..120 {
        let base = if i % 2 == 0 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, -1.0] };
        let scale = rng.random_range(0.5..3.0);
        data.extend(base.iter().map(|b| scale * (b + noise.sample(&mut rng))));
    }
    let v = Matrix::from_vec(120, 3, data);
    let report = cluster_rows(&v, &ClusterConfig::default()).unwrap();
    assert_eq!(report.k, 2);
    assert!(report.silhouette > 0.8);
    for i in (0..120).step_by(2) {
        assert_eq!(report.assignments[i], report.assignments[0]);
        assert_ne!(report.assignments[i + 1], report.assignments[0]);
    }
    assert_eq!(report.sizes.iter().sum::<usize>(), 120);
}

#[test]
fn clustering_rejects_bad_input() {
    let one = Matrix::from_vec(1, 2, vec![1.0, 0.0]);
    assert!(matches!(cluster_rows(&one, &ClusterConfig::default()), Err(DirectionsError::TooFewRows(1))));
    let same = Matrix::from_vec(3, 2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    assert!(matches!(cluster_rows(&same, &ClusterConfig::default()), Err(DirectionsError::DegenerateClustering)));
    let v = gaussian(&mut rng(14), 10, 2);
    let bad = ClusterConfig { k_min: 4, k_max: 3, ..ClusterConfig::default() };
    assert!(matches!(cluster_rows(&v, &bad), Err(DirectionsError::InvalidConfig(_))));
}

#[test]
fn spectrum_rejects_bad_config() {
    let v = gaussian(&mut rng(15), 10, 3);
    let dirs = DirectionsMatrix::from_rows(v, (0..10).collect(), labels(3));
    let bad_energy = SpectrumConfig { energy_threshold: 1.5, ..SpectrumConfig::default() };
    assert!(matches!(spectrum(&dirs, &bad_energy), Err(DirectionsError::InvalidConfig(_))));
    let unknown = SpectrumConfig { drop_columns: vec!["nope".into()], ..SpectrumConfig::default() };
    assert!(matches!(spectrum(&dirs, &unknown), Err(DirectionsError::UnknownColumn(_))));
}

#[test]
fn directions_keep_outside_rows_only() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    let train = continuous_dataset(&pts);
    let queries = vec![vec![0.2, 0.2], vec![2.0, 0.0], vec![-1.0, -1.0]];
    let test = continuous_dataset(&queries);
    let config = SolverConfig::default();
    let results: Vec<ProjectionResult> = queries
        .iter()
        .map(|q| project_continuous(&ProjectionProblem::new(q, &train, &config)).unwrap())
        .collect();
    let dirs = build_directions(&test, results.iter().enumerate()).unwrap();
    assert_eq!(dirs.rows, vec![1, 2]);
    let expected = [-1.0, 0.0, 1.0, 1.0];
    for (got, want) in dirs.v.as_slice().iter().zip(expected) {
        assert!((got - want).abs() < 1e-9);
    }
    assert!(matches!(
        build_directions(&test, results.iter().enumerate().take(1)),
        Err(DirectionsError::NoOutsideSamples)
    ));
}
