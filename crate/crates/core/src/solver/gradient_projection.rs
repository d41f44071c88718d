//! Active-set gradient projection over the simplex weights.
//!
//! Each iteration computes the Cauchy point, the first minimizer of the
//! objective along the projected-gradient path `P(alpha - t g)`, then
//! minimizes over the affine hull of the rows left non-binding, stepping back
//! to the simplex with a ratio test.

use super::affine::affine_least_squares;
use super::{gradient, HullView, IterState, SolveError, SolverConfig};
use crate::matrix::{axpy, dot};

/// Slack magnitude under which a coordinate sits on the boundary.
const BOUNDARY_EPS: f64 = 1e-14;

pub(crate) fn solve(
    view: &HullView<'_>,
    query: &[f64],
    config: &SolverConfig,
    init: &[(usize, f64)],
) -> Result<IterState, SolveError> {
    let m = view.len();
    let mut alpha = vec![0.0; m];
    for &(k, a) in init {
        alpha[k] = a;
    }
    let mut support: Vec<usize> = init.iter().map(|p| p.0).collect();
    let mut xh = vec![0.0; view.dim()];
    recompute_point(view, &alpha, &support, &mut xh);
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let mut stalled = 0;
    let mut objective = f64::INFINITY;

    loop {
        let r: Vec<f64> = xh.iter().zip(query).map(|(a, b)| a - b).collect();
        let current = 0.5 * dot(&r, &r);
        if current < objective - 1e-15 * objective.abs().max(1.0) {
            stalled = 0;
        } else {
            stalled += 1;
        }
        objective = objective.min(current);
        gradient(view, &r, &mut g);
        let gap = frank_wolfe_gap(&alpha, &support, &g);
        if config.settled(gap, 2.0 * current) {
            return Ok(IterState::from_dense(&alpha, iterations, true));
        }
        // Gap open but no descent left at working precision.
        if iterations >= config.max_iter || stalled >= 3 {
            return Ok(IterState::from_dense(&alpha, iterations, false));
        }
        iterations += 1;

        cauchy_point(view, &mut alpha, &g, &r)?;
        support = (0..m).filter(|&k| alpha[k] > 0.0).collect();
        subspace_minimize(view, query, &mut alpha, &mut support);
        recompute_point(view, &alpha, &support, &mut xh);
    }
}

/// `alpha . g - min g`, the certificate expressed in gradient terms.
pub(crate) fn frank_wolfe_gap(alpha: &[f64], support: &[usize], g: &[f64]) -> f64 {
    let along: f64 = support.iter().map(|&k| alpha[k] * g[k]).sum();
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    along - min
}

pub(crate) fn recompute_point(view: &HullView<'_>, alpha: &[f64], support: &[usize], xh: &mut [f64]) {
    xh.iter_mut().for_each(|v| *v = 0.0);
    for &k in support {
        axpy(alpha[k], view.point(k), xh);
    }
}

/// Follows `P(alpha - t g)` from `t = 0` to its first local minimizer and
/// stores the result in `alpha`. Returns whether the point moved.
///
/// With `s_k(t) = alpha_k - t g_k - tau(t)`, the path is `max(s_k, 0)`. While
/// the positive set `A` is fixed, every slack moves at rate
/// `mean_A(g) - g_k`, so the path is piecewise linear with breakpoints where
/// some slack crosses zero.
pub(crate) fn cauchy_point(
    view: &HullView<'_>,
    alpha: &mut [f64],
    g: &[f64],
    r0: &[f64],
) -> Result<bool, SolveError> {
    let m = alpha.len();
    let d = r0.len();
    let mut s: Vec<f64> = alpha.to_vec();
    let mut r = r0.to_vec();
    let mut active = active_set(&s, g);
    let mut moved = false;
    let mut w = vec![0.0; d];
    let max_segments = 4 * m + 16;

    for _ in 0..max_segments {
        let mean = active.iter().map(|&k| g[k]).sum::<f64>() / active.len() as f64;
        w.iter_mut().for_each(|v| *v = 0.0);
        for &k in &active {
            let rate = mean - g[k];
            if rate != 0.0 {
                axpy(rate, view.point(k), &mut w);
            }
        }
        let slope = dot(&r, &w);
        let curvature = dot(&w, &w);
        if !slope.is_finite() || !curvature.is_finite() {
            return Err(SolveError::NumericBreakdown("non-finite Cauchy path".into()));
        }
        if slope >= 0.0 || curvature == 0.0 {
            break;
        }
        let t_min = -slope / curvature;

        // Next breakpoint.
        let mut t_event = f64::INFINITY;
        for k in 0..m {
            let rate = mean - g[k];
            if s[k] > BOUNDARY_EPS {
                if rate < 0.0 {
                    t_event = t_event.min(s[k] / -rate);
                }
            } else if rate > 0.0 && s[k] < -BOUNDARY_EPS {
                t_event = t_event.min(-s[k] / rate);
            }
        }

        let t = t_min.min(t_event);
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += t * (mean - g[k]);
        }
        axpy(t, &w, &mut r);
        moved = true;
        if t_min <= t_event {
            break;
        }
        active = active_set(&s, g);
    }

    if !moved {
        return Ok(false);
    }
    let mut total = 0.0;
    for k in 0..m {
        let v = if s[k] > BOUNDARY_EPS { s[k] } else { 0.0 };
        alpha[k] = v;
        total += v;
    }
    if !(total > 0.0) {
        return Err(SolveError::NumericBreakdown("Cauchy point left the simplex".into()));
    }
    alpha.iter_mut().for_each(|a| *a /= total);
    Ok(true)
}

/// Positive slacks plus the boundary coordinates that increase when the path
/// leaves the current point.
fn active_set(s: &[f64], g: &[f64]) -> Vec<usize> {
    let mut active: Vec<usize> = Vec::new();
    let mut boundary: Vec<usize> = Vec::new();
    for (k, &sk) in s.iter().enumerate() {
        if sk > BOUNDARY_EPS {
            active.push(k);
        } else if sk >= -BOUNDARY_EPS {
            boundary.push(k);
        }
    }
    let mut sum: f64 = active.iter().map(|&k| g[k]).sum();
    let mut count = active.len() as f64;
    if active.is_empty() {
        // Degenerate: restart from the boundary coordinate with lowest g.
        if let Some(&k) = boundary.iter().min_by(|&&a, &&b| g[a].total_cmp(&g[b])) {
            active.push(k);
            sum = g[k];
            count = 1.0;
        }
    }
    let mean = sum / count;
    boundary.retain(|&k| g[k] < mean && !active.contains(&k));
    boundary.sort_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));
    for k in boundary {
        if g[k] < sum / count {
            active.push(k);
            sum += g[k];
            count += 1.0;
        } else {
            break;
        }
    }
    active
}

/// Minimizes over the affine hull of the current support, stepping back to
/// the simplex when the unconstrained face minimizer has negative weights.
pub(crate) fn subspace_minimize(view: &HullView<'_>, query: &[f64], alpha: &mut [f64], support: &mut Vec<usize>) {
    for _ in 0..=support.len() {
        if support.len() <= 1 {
            if let Some(&k) = support.first() {
                alpha[k] = 1.0;
            }
            return;
        }
        let reference = (0..support.len())
            .max_by(|&a, &b| alpha[support[a]].total_cmp(&alpha[support[b]]))
            .unwrap_or(0);
        let (beta, _) = affine_least_squares(view, support, reference, query);
        let mut step = 1.0;
        let mut blocking = None;
        for (i, &k) in support.iter().enumerate() {
            let p = beta[i] - alpha[k];
            if p < 0.0 {
                let ratio = alpha[k] / -p;
                if ratio < step {
                    step = ratio;
                    blocking = Some(i);
                }
            }
        }
        for (i, &k) in support.iter().enumerate() {
            alpha[k] += step * (beta[i] - alpha[k]);
        }
        if let Some(i) = blocking {
            alpha[support[i]] = 0.0;
        }
        let mut kept = Vec::with_capacity(support.len());
        let mut total = 0.0;
        for &k in support.iter() {
            if alpha[k] > 0.0 {
                kept.push(k);
                total += alpha[k];
            } else {
                alpha[k] = 0.0;
            }
        }
        for &k in &kept {
            alpha[k] /= total;
        }
        *support = kept;
        if blocking.is_none() {
            return;
        }
    }
}
