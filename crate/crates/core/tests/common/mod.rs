#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use hullaudit::prelude::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// Unscaled dataset of `d` continuous columns, so encoded equals raw.
pub fn continuous_dataset(points: &[Vec<f64>]) -> EncodedDataset {
    let d = points[0].len();
    let schema = FeatureSchema::new((0..d).map(|j| FeatureDecl::continuous(&format!("x{j}"))).collect()).unwrap();
    let raw: Vec<Vec<RawValue>> = points.iter().map(|p| p.iter().map(|&v| RawValue::Number(v)).collect()).collect();
    let layout = Arc::new(build_layout(&schema, ScalerKind::None, &raw).unwrap());
    EncodedDataset::from_raw_rows(layout, &raw, (0..points.len()).collect()).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Least-squares affine projection of `x` onto the span of `pts` via the
/// normal equations; returns the barycentric weights, or `None` when the
/// points are affinely dependent.
fn affine_weights(pts: &[&[f64]], x: &[f64]) -> Option<Vec<f64>> {
    let k = pts.len();
    let d = x.len();
    let p0 = pts[0];
    if k == 1 {
        return Some(vec![1.0]);
    }
    let a = DMatrix::from_fn(d, k - 1, |r, c| pts[c + 1][r] - p0[r]);
    let b = DVector::from_fn(d, |r, _| x[r] - p0[r]);
    let gram = a.tr_mul(&a);
    let chol = gram.clone().cholesky()?;
    if gram.determinant() <= 1e-12 * gram.diagonal().product() {
        return None;
    }
    let beta = chol.solve(&a.tr_mul(&b));
    let mut w = vec![1.0 - beta.sum()];
    w.extend(beta.iter());
    Some(w)
}

/// Distance from `x` to the convex hull of `pts` by enumerating every
/// support of at most `d + 1` points. Exact up to round-off.
pub fn brute_force_distance(pts: &[Vec<f64>], x: &[f64]) -> f64 {
    let n = pts.len();
    let d = x.len();
    let max_k = n.min(d + 1);
    let mut best = f64::INFINITY;
    let mut subset = Vec::new();
    fn rec(
        start: usize,
        max_k: usize,
        pts: &[Vec<f64>],
        x: &[f64],
        subset: &mut Vec<usize>,
        best: &mut f64,
    ) {
        if !subset.is_empty() {
            let chosen: Vec<&[f64]> = subset.iter().map(|&i| pts[i].as_slice()).collect();
            if let Some(w) = affine_weights(&chosen, x) {
                if w.iter().all(|&v| v >= -1e-10) {
                    let mut p = vec![0.0; x.len()];
                    for (wi, c) in w.iter().zip(&chosen) {
                        for (pj, cj) in p.iter_mut().zip(c.iter()) {
                            *pj += wi * cj;
                        }
                    }
                    *best = best.min(dist(&p, x));
                }
            }
        }
        if subset.len() == max_k {
            return;
        }
        for i in start..pts.len() {
            subset.push(i);
            rec(i + 1, max_k, pts, x, subset, best);
            subset.pop();
        }
    }
    rec(0, max_k, pts, x, &mut subset, &mut best);
    let _ = d;
    best
}

/// Mixed dataset: `n_num` continuous columns plus categorical groups with
/// the given level counts, unscaled.
pub struct Mixed {
    pub schema: FeatureSchema,
    pub train: EncodedDataset,
    pub raw: Vec<Vec<RawValue>>,
}

pub fn level_name(g: usize, l: usize) -> String {
    format!("g{g}l{l}")
}

pub fn mixed_schema(n_num: usize, levels: &[usize]) -> FeatureSchema {
    let mut feats: Vec<FeatureDecl> = (0..n_num).map(|j| FeatureDecl::continuous(&format!("x{j}"))).collect();
    for (g, &k) in levels.iter().enumerate() {
        let names: Vec<String> = (0..k).map(|l| level_name(g, l)).collect();
        feats.push(FeatureDecl::categorical(&format!("c{g}"), &names));
    }
    FeatureSchema::new(feats).unwrap()
}

pub fn random_mixed_row(rng: &mut ChaCha8Rng, n_num: usize, levels: &[usize]) -> Vec<RawValue> {
    let mut row: Vec<RawValue> = (0..n_num).map(|_| RawValue::Number(rng.random_range(-1.0..1.0))).collect();
    for (g, &k) in levels.iter().enumerate() {
        row.push(RawValue::Level(level_name(g, rng.random_range(0..k))));
    }
    row
}

pub fn mixed_dataset(rng: &mut ChaCha8Rng, n: usize, n_num: usize, levels: &[usize], scaler: ScalerKind) -> Mixed {
    let schema = mixed_schema(n_num, levels);
    let raw: Vec<Vec<RawValue>> = (0..n).map(|_| random_mixed_row(rng, n_num, levels)).collect();
    let layout = Arc::new(build_layout(&schema, scaler, &raw).unwrap());
    let train = EncodedDataset::from_raw_rows(layout, &raw, (0..n).collect()).unwrap();
    Mixed { schema, train, raw }
}

/// Oracle for domains whose categorical groups are all discrete or fixed:
/// every feasible point is a convex combination of rows sharing one full
/// profile, so the distance is the minimum over admissible profiles of the
/// categorical mismatch plus the numeric hull distance of that profile's
/// rows. `fixed[g]` pins group `g` to the query's level. `None` when no
/// profile is admissible.
pub fn discrete_oracle(ds: &EncodedDataset, query: &[f64], fixed: &[bool]) -> Option<f64> {
    let layout = &ds.layout;
    let numeric: Vec<usize> = layout.numeric.iter().map(|c| c.column).collect();
    let mut by_profile: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..ds.len() {
        let p = ds.point(i);
        let key: Vec<usize> = layout.groups.iter().map(|g| g.range().find(|&c| p[c] > 0.5).unwrap()).collect();
        by_profile.entry(key).or_default().push(i);
    }
    let mut best: Option<f64> = None;
    for (key, rows) in &by_profile {
        let admissible = layout.groups.iter().zip(key).zip(fixed).all(|((g, &c), &f)| !f || query[c] > 0.5 && g.range().contains(&c));
        if !admissible {
            continue;
        }
        let mut cat = 0.0;
        for (g, &c) in layout.groups.iter().zip(key) {
            for j in g.range() {
                let t = if j == c { 1.0 } else { 0.0 };
                cat += (query[j] - t) * (query[j] - t);
            }
        }
        let pts: Vec<Vec<f64>> = rows.iter().map(|&i| numeric.iter().map(|&c| ds.point(i)[c]).collect()).collect();
        let q: Vec<f64> = numeric.iter().map(|&c| query[c]).collect();
        let num = if numeric.is_empty() { 0.0 } else { brute_force_distance(&pts, &q) };
        let total = (cat + num * num).sqrt();
        best = Some(best.map_or(total, |b: f64| b.min(total)));
    }
    best
}
