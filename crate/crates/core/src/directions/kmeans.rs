//! k-means++ / Lloyd clustering with silhouette-based choice of `k`.
//!
//! Rows are processed in lexicographic order of their values, so the result
//! depends on the set of rows and the seed only, not on their order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DirectionsError;
use crate::matrix::{sq_dist, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    /// Cluster unit directions instead of raw vectors.
    pub normalize: bool,
    pub max_iter: usize,
    /// Independent k-means++ starts per `k`; the lowest inertia wins.
    pub restarts: usize,
    /// Rows used to score silhouettes; larger inputs are subsampled.
    pub silhouette_sample: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { k_min: 2, k_max: 8, seed: 42, normalize: true, max_iter: 300, restarts: 4, silhouette_sample: 3000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    /// Cluster of each input row, in input order.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub silhouette: f64,
    /// Mean silhouette for every `k` tried.
    pub silhouette_by_k: Vec<(usize, f64)>,
    pub seed: u64,
    pub normalized: bool,
    /// Rows the silhouettes were computed on.
    pub silhouette_rows: usize,
}

/// Runs k-means for each `k` in the configured range and keeps the one with
/// the highest mean silhouette.
pub fn cluster_rows(v: &Matrix, config: &ClusterConfig) -> Result<ClusterReport, DirectionsError> {
    let m = v.nrows();
    if m < 2 {
        return Err(DirectionsError::TooFewRows(m));
    }
    if config.k_min < 2 || config.k_min > config.k_max {
        return Err(DirectionsError::InvalidConfig(format!("k range {}..{}", config.k_min, config.k_max)));
    }
    let mut data: Vec<Vec<f64>> = v.rows_iter().map(<[f64]>::to_vec).collect();
    if config.normalize {
        for row in &mut data {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
    let mut canonical: Vec<usize> = (0..m).collect();
    canonical.sort_by(|&a, &b| lex_cmp(&data[a], &data[b]));
    let points: Vec<Vec<f64>> = canonical.iter().map(|&i| data[i].clone()).collect();
    let distinct = 1 + points.windows(2).filter(|w| lex_cmp(&w[0], &w[1]).is_ne()).count();
    if distinct < 2 {
        return Err(DirectionsError::DegenerateClustering);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sample: Vec<usize> = if m > config.silhouette_sample {
        let mut idx: Vec<usize> = (0..m).collect();
        for i in 0..config.silhouette_sample {
            let j = rng.random_range(i..m);
            idx.swap(i, j);
        }
        let mut s = idx[..config.silhouette_sample].to_vec();
        s.sort_unstable();
        s
    } else {
        (0..m).collect()
    };

    let k_max = config.k_max.min(distinct);
    let mut best: Option<(f64, usize, Vec<usize>, Vec<Vec<f64>>)> = None;
    let mut by_k = Vec::new();
    for k in config.k_min..=k_max {
        let mut run: Option<(f64, Vec<usize>, Vec<Vec<f64>>)> = None;
        for _ in 0..config.restarts.max(1) {
            let (inertia, labels, centroids) = lloyd(&points, k, config.max_iter, &mut rng);
            if run.as_ref().is_none_or(|r| inertia < r.0) {
                run = Some((inertia, labels, centroids));
            }
        }
        let (_, labels, centroids) = run.expect("at least one restart");
        let score = silhouette(&points, &labels, k, &sample);
        by_k.push((k, score));
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, k, labels, centroids));
        }
    }
    let (score, k, labels, centroids) = best.ok_or(DirectionsError::DegenerateClustering)?;

    // Relabel clusters by first appearance in canonical order.
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &labels {
        if relabel[l] == usize::MAX {
            relabel[l] = next;
            next += 1;
        }
    }
    let mut assignments = vec![0; m];
    for (pos, &orig) in canonical.iter().enumerate() {
        assignments[orig] = relabel[labels[pos]];
    }
    let mut ordered = vec![Vec::new(); k];
    for (c, centroid) in centroids.into_iter().enumerate() {
        if relabel[c] != usize::MAX {
            ordered[relabel[c]] = centroid;
        }
    }
    ordered.retain(|c| !c.is_empty());
    let mut sizes = vec![0; ordered.len()];
    assignments.iter().for_each(|&a| sizes[a] += 1);
    Ok(ClusterReport {
        k: ordered.len(),
        assignments,
        centroids: ordered,
        sizes,
        silhouette: score,
        silhouette_by_k: by_k,
        seed: config.seed,
        normalized: config.normalize,
        silhouette_rows: sample.len(),
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

/// k-means++ seeding followed by Lloyd iterations. Returns inertia, labels
/// and centroids.
fn lloyd(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>, Vec<Vec<f64>>) {
    let m = points.len();
    let d = points[0].len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..m)].clone());
    let mut closest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = m - 1;
            for (i, &c) in closest.iter().enumerate() {
                if target < c {
                    chosen = i;
                    break;
                }
                target -= c;
            }
            chosen
        } else {
            rng.random_range(0..m)
        };
        centroids.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let mut labels = vec![usize::MAX; m];
    let mut inertia = f64::INFINITY;
    for _ in 0..max_iter {
        let mut changed = false;
        inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, dist) = nearest(&centroids, p);
            inertia += dist;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Empty cluster: move it to the point worst served.
                let far = (0..m)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[labels[a]]).total_cmp(&sq_dist(&points[b], &centroids[labels[b]]))
                    })
                    .expect("non-empty");
                centroids[c] = points[far].clone();
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    (inertia, labels, centroids)
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Mean silhouette over `sample`, distances measured within the sample.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize], k: usize, sample: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in sample {
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for &j in sample {
            if i != j {
                sum[labels[j]] += sq_dist(&points[i], &points[j]).sqrt();
                count[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if count[own] == 0 {
            continue;
        }
        let a = sum[own] / count[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && count[c] > 0)
            .map(|c| sum[c] / count[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    total / sample.len() as f64
}
