//! The directions matrix `V = X_h - X` of the outside queries and its
//! spectrum: numerical rank, condition number, dominant patterns, redundant
//! columns and clusters.

mod kmeans;
mod rrqr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::EncodedDataset;
use crate::linalg::Svd;
use crate::matrix::Matrix;
use crate::solver::{Membership, ProjectionResult};

pub use kmeans::{cluster_rows, silhouette, ClusterConfig, ClusterReport};
pub use rrqr::pivoted_qr;

#[derive(Debug, Error)]
pub enum DirectionsError {
    #[error("no outside samples to build directions from")]
    NoOutsideSamples,
    #[error("clustering needs at least two rows, got {0}")]
    TooFewRows(usize),
    #[error("all rows are identical; nothing to cluster")]
    DegenerateClustering,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

/// One row per outside query, `x_h - x` in scaled space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionsMatrix {
    pub v: Matrix,
    /// Test-set index of each row.
    pub rows: Vec<usize>,
    pub column_labels: Vec<String>,
}

impl DirectionsMatrix {
    pub fn from_rows(v: Matrix, rows: Vec<usize>, column_labels: Vec<String>) -> Self {
        Self { v, rows, column_labels }
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.column_labels.iter().position(|l| l == label)
    }
}

/// Stacks `x_h - x` for every outside result. `results` pairs a test-set
/// index with its projection.
pub fn build_directions<'a, I>(test: &EncodedDataset, results: I) -> Result<DirectionsMatrix, DirectionsError>
where
    I: IntoIterator<Item = (usize, &'a ProjectionResult)>,
{
    let d = test.width();
    let mut data = Vec::new();
    let mut rows = Vec::new();
    for (i, r) in results {
        if r.status != Membership::Outside {
            continue;
        }
        data.extend(r.point.iter().zip(test.point(i)).map(|(h, x)| h - x));
        rows.push(i);
    }
    if rows.is_empty() {
        return Err(DirectionsError::NoOutsideSamples);
    }
    Ok(DirectionsMatrix {
        v: Matrix::from_vec(rows.len(), d, data),
        rows,
        column_labels: test.layout.column_labels(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumConfig {
    /// Absolute cutoff on singular values; `None` uses
    /// `max(m, d) * eps * sigma_1`.
    pub rank_tol: Option<f64>,
    pub energy_threshold: f64,
    /// Columns removed before recomputing the condition number.
    pub drop_columns: Vec<String>,
    /// Number of redundancy candidates to report.
    pub redundant_k: usize,
    /// Loadings listed per dominant pattern.
    pub pattern_loadings: usize,
    pub clustering: Option<ClusterConfig>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            rank_tol: None,
            energy_threshold: 0.95,
            drop_columns: Vec::new(),
            redundant_k: 5,
            pattern_loadings: 5,
            clustering: Some(ClusterConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub singular_value: f64,
    pub energy_fraction: f64,
    /// Largest-magnitude loadings of the right singular vector.
    pub loadings: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundantColumn {
    pub column: usize,
    pub label: String,
    /// `|R_kk|` at the column's pivot position.
    pub pivot_magnitude: f64,
    pub condition_number_after_drop: f64,
    pub condition_number_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub columns: Vec<String>,
    pub rank: usize,
    pub condition_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub rank_tol: f64,
    pub full_rank: bool,
    /// `sigma_1 / sigma_r` for numerical rank `r`.
    pub condition_number: f64,
    /// `sigma_1 / sigma_min` over all `min(m, d)` singular values.
    pub condition_number_all: f64,
    pub singular_values: Vec<f64>,
    pub energy_threshold: f64,
    pub dominant_patterns: usize,
    pub patterns: Vec<Pattern>,
    pub redundant: Vec<RedundantColumn>,
    pub dropped: Option<DropReport>,
    pub clusters: Option<ClusterReport>,
    pub seed: Option<u64>,
}

/// Singular values (descending) and right singular vectors (rows) of `v`.
fn svd(v: &Matrix) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let (m, d) = (v.nrows(), v.ncols());
    let a = v.to_nalgebra();
    // Tall inputs go through a QR first so the SVD runs on the d x d factor.
    let target = if m > d { a.qr().r() } else { a };
    let svd = Svd::new(&target);
    (svd.values, Some(svd.v.transpose()))
}

fn rank_and_condition(values: &[f64], m: usize, d: usize, rank_tol: Option<f64>) -> (usize, f64, f64) {
    let s1 = values.first().copied().unwrap_or(0.0);
    let tol = rank_tol.unwrap_or(m.max(d) as f64 * f64::EPSILON * s1);
    let rank = values.iter().filter(|&&s| s > tol).count();
    let kappa = if rank == 0 { f64::INFINITY } else { s1 / values[rank - 1] };
    (rank, kappa, tol)
}

/// Condition number `sigma_1 / sigma_r` of a matrix.
pub fn condition_number(v: &Matrix, rank_tol: Option<f64>) -> f64 {
    let (values, _) = svd(v);
    rank_and_condition(&values, v.nrows(), v.ncols(), rank_tol).1
}

/// Smallest `r` with `sum_{i<=r} s_i^2 >= theta * sum s_i^2`.
pub fn dominant_count(values: &[f64], theta: f64) -> usize {
    let total: f64 = values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (i, s) in values.iter().enumerate() {
        acc += s * s;
        if acc >= theta * total {
            return i + 1;
        }
    }
    values.len()
}

/// Columns pivoted last by column-pivoted QR, last pivot first, each with
/// the condition number after removing it.
pub fn redundant_features(v: &Matrix, labels: &[String], k: usize, rank_tol: Option<f64>) -> Vec<RedundantColumn> {
    let (m, d) = (v.nrows(), v.ncols());
    let (order, diag) = pivoted_qr(v.as_slice(), m, d);
    let before = condition_number(v, rank_tol);
    let mut out = Vec::new();
    for pos in (0..d).rev().take(k) {
        let column = order[pos];
        let keep: Vec<usize> = (0..d).filter(|&j| j != column).collect();
        let after = if keep.is_empty() { f64::INFINITY } else { condition_number(&v.select_columns(&keep), rank_tol) };
        out.push(RedundantColumn {
            column,
            label: labels.get(column).cloned().unwrap_or_else(|| column.to_string()),
            pivot_magnitude: diag[pos],
            condition_number_after_drop: after,
            condition_number_delta: before - after,
        });
    }
    out
}

/// Full spectrum report of a directions matrix.
pub fn spectrum(dirs: &DirectionsMatrix, config: &SpectrumConfig) -> Result<SpectrumReport, DirectionsError> {
    let v = &dirs.v;
    let (m, d) = (v.nrows(), v.ncols());
    if m == 0 {
        return Err(DirectionsError::NoOutsideSamples);
    }
    if !(config.energy_threshold > 0.0 && config.energy_threshold <= 1.0) {
        return Err(DirectionsError::InvalidConfig("energy threshold must lie in (0, 1]".into()));
    }
    let (values, v_t) = svd(v);
    let (rank, kappa, tol) = rank_and_condition(&values, m, d, config.rank_tol);
    let s1 = values.first().copied().unwrap_or(0.0);
    let smin = values.last().copied().unwrap_or(0.0);
    let dominant = dominant_count(&values, config.energy_threshold);
    let total: f64 = values.iter().map(|s| s * s).sum();

    let mut patterns = Vec::new();
    if let Some(v_t) = &v_t {
        for (i, &s) in values.iter().enumerate().take(dominant) {
            let mut loadings: Vec<(String, f64)> =
                (0..d).map(|j| (dirs.column_labels[j].clone(), v_t[(i, j)])).collect();
            loadings.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
            loadings.truncate(config.pattern_loadings);
            patterns.push(Pattern {
                singular_value: s,
                energy_fraction: if total > 0.0 { s * s / total } else { 0.0 },
                loadings,
            });
        }
    }

    let redundant = redundant_features(v, &dirs.column_labels, config.redundant_k.min(d), config.rank_tol);

    let dropped = if config.drop_columns.is_empty() {
        None
    } else {
        let mut drop = Vec::new();
        for label in &config.drop_columns {
            drop.push(dirs.column_index(label).ok_or_else(|| DirectionsError::UnknownColumn(label.clone()))?);
        }
        let keep: Vec<usize> = (0..d).filter(|j| !drop.contains(j)).collect();
        let reduced = v.select_columns(&keep);
        let (values, _) = svd(&reduced);
        let (rank, kappa, _) = rank_and_condition(&values, m, keep.len(), config.rank_tol);
        Some(DropReport { columns: config.drop_columns.clone(), rank, condition_number: kappa })
    };

    let clusters = match &config.clustering {
        Some(c) if m >= 2 => match cluster_rows(v, c) {
            Ok(r) => Some(r),
            Err(DirectionsError::DegenerateClustering) => None,
            Err(e) => return Err(e),
        },
        _ => None,
    };

    Ok(SpectrumReport {
        rows: m,
        cols: d,
        rank,
        rank_tol: tol,
        full_rank: rank == m.min(d),
        condition_number: kappa,
        condition_number_all: if smin > 0.0 { s1 / smin } else { f64::INFINITY },
        singular_values: values,
        energy_threshold: config.energy_threshold,
        dominant_patterns: dominant,
        patterns,
        redundant,
        dropped,
        seed: config.clustering.as_ref().map(|c| c.seed),
        clusters,
    })
}
