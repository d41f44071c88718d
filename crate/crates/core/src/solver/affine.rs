//! Least-squares problems restricted to the affine hull of a few points.

use nalgebra::{DMatrix, DVector};

use super::HullView;
use crate::linalg::Svd;

/// Relative cutoff below which singular values count as zero.
const RANK_RTOL: f64 = 1e-11;

/// Barycentric weights (summing to one) of the point in the affine hull of
/// `members` closest to `target`. Among equally good weightings the one with
/// minimum norm relative to the reference member is returned. Also returns
/// the affine rank of the member set.
pub(crate) fn affine_least_squares(
    view: &HullView<'_>,
    members: &[usize],
    reference: usize,
    target: &[f64],
) -> (Vec<f64>, usize) {
    let k = members.len();
    debug_assert!(reference < k);
    if k == 1 {
        return (vec![1.0], 0);
    }
    let d = target.len();
    let base = view.point(members[reference]);
    let others: Vec<usize> = (0..k).filter(|&i| i != reference).collect();
    let m = DMatrix::from_fn(d, k - 1, |r, c| view.point(members[others[c]])[r] - base[r]);
    let rhs = DVector::from_fn(d, |r, _| target[r] - base[r]);

    let svd = Svd::new(&m);
    let smax = svd.values.first().copied().unwrap_or(0.0);
    let cutoff = RANK_RTOL * smax.max(f64::MIN_POSITIVE);
    let rank = svd.rank(cutoff);
    let gamma = svd.solve(&rhs, cutoff);

    let mut weights = vec![0.0; k];
    let mut rest = 0.0;
    for (c, &i) in others.iter().enumerate() {
        weights[i] = gamma[c];
        rest += gamma[c];
    }
    weights[reference] = 1.0 - rest;
    (weights, rank)
}

/// Affine rank of a set of points.
pub(crate) fn affine_rank(view: &HullView<'_>, members: &[usize]) -> usize {
    if members.len() <= 1 {
        return 0;
    }
    let d = view.dim();
    let base = view.point(members[0]);
    let m = DMatrix::from_fn(d, members.len() - 1, |r, c| view.point(members[c + 1])[r] - base[r]);
    let svd = Svd::new(&m);
    let smax = svd.values.first().copied().unwrap_or(0.0);
    svd.rank(RANK_RTOL * smax.max(f64::MIN_POSITIVE))
}

/// Carathéodory reduction: rewrites a convex combination over affinely
/// dependent points as one over an affinely independent subset with the same
/// image. `weights` is indexed like `members`.
pub(crate) fn caratheodory_reduce(view: &HullView<'_>, members: &mut Vec<usize>, weights: &mut Vec<f64>) {
    let d = view.dim();
    loop {
        let k = members.len();
        if k <= 1 {
            return;
        }
        // Null vector c of [P_i - P_0]: sum c_i (P_i - P_0) = 0.
        let base = view.point(members[0]);
        let m = DMatrix::from_fn(d, k - 1, |r, c| view.point(members[c + 1])[r] - base[r]);
        let svd = Svd::new(&m);
        let smax = svd.values.first().copied().unwrap_or(0.0);
        let cutoff = RANK_RTOL * smax.max(f64::MIN_POSITIVE);
        if svd.rank(cutoff) == k - 1 {
            return;
        }
        // Right singular vector of the smallest singular value (or any
        // vector outside the row space when k - 1 > d).
        let null = if k - 1 > d { null_vector_wide(&m) } else { svd.v.column(k - 2).into_owned() };
        // Affine dependence: coefficients summing to zero.
        let mut coef = vec![0.0; k];
        let mut s = 0.0;
        for i in 0..k - 1 {
            coef[i + 1] = null[i];
            s += null[i];
        }
        coef[0] = -s;
        // Step weights - t*coef until the first weight hits zero.
        let mut t = f64::INFINITY;
        let mut hit = None;
        for i in 0..k {
            if coef[i] > 0.0 {
                let r = weights[i] / coef[i];
                if r < t {
                    t = r;
                    hit = Some(i);
                }
            }
        }
        let Some(hit) = hit else { return };
        for i in 0..k {
            weights[i] -= t * coef[i];
        }
        weights[hit] = 0.0;
        let mut keep_m = Vec::with_capacity(k - 1);
        let mut keep_w = Vec::with_capacity(k - 1);
        for i in 0..k {
            if weights[i] > 0.0 {
                keep_m.push(members[i]);
                keep_w.push(weights[i]);
            }
        }
        let total: f64 = keep_w.iter().sum();
        keep_w.iter_mut().for_each(|w| *w /= total);
        *members = keep_m;
        *weights = keep_w;
    }
}

fn null_vector_wide(m: &DMatrix<f64>) -> DVector<f64> {
    // More columns than rows: take the rows' span complement through a
    // square completion.
    let (r, c) = m.shape();
    let mut sq = DMatrix::zeros(c, c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    Svd::new(&sq).v.column(c - 1).into_owned()
}
