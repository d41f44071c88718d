//! Pairwise Frank-Wolfe with exact line search. Memory is one weight and
//! one gradient entry per row; every iteration moves mass from the worst
//! support row to the best row overall.

use super::{gradient, HullView, IterState, SolveError, SolverConfig};
use crate::matrix::{axpy, dot};

pub(crate) fn solve(
    view: &HullView<'_>,
    query: &[f64],
    config: &SolverConfig,
    init: &[(usize, f64)],
) -> Result<IterState, SolveError> {
    let m = view.len();
    let d = query.len();
    let mut alpha = vec![0.0; m];
    let mut support = Vec::with_capacity(init.len());
    let mut r: Vec<f64> = query.iter().map(|v| -v).collect();
    for &(k, a) in init {
        alpha[k] = a;
        support.push(k);
        axpy(a, view.point(k), &mut r);
    }
    let mut g = vec![0.0; m];
    let mut dir = vec![0.0; d];

    let mut spent = 0;
    for iterations in 0..=config.max_iter {
        spent = iterations;
        gradient(view, &r, &mut g);
        let (toward, g_min) = g
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty hull");
        let (away_pos, &away) = support
            .iter()
            .enumerate()
            .max_by(|a, b| g[*a.1].total_cmp(&g[*b.1]))
            .expect("non-empty support");
        let along: f64 = support.iter().map(|&k| alpha[k] * g[k]).sum();
        if config.settled(along - g_min, dot(&r, &r)) {
            return Ok(IterState::from_dense(&alpha, iterations, true));
        }
        if iterations == config.max_iter || toward == away {
            break;
        }

        let (pt, pa) = (view.point(toward), view.point(away));
        for j in 0..d {
            dir[j] = pt[j] - pa[j];
        }
        let curvature = dot(&dir, &dir);
        if curvature == 0.0 || !curvature.is_finite() {
            if !curvature.is_finite() {
                return Err(SolveError::NumericBreakdown("non-finite direction".into()));
            }
            break;
        }
        let max_step = alpha[away];
        let step = (-dot(&r, &dir) / curvature).clamp(0.0, max_step);
        if step <= 0.0 {
            break;
        }
        if alpha[toward] == 0.0 {
            support.push(toward);
        }
        alpha[toward] += step;
        if step >= max_step {
            alpha[away] = 0.0;
            let pos = support.iter().position(|&k| k == away).unwrap_or(away_pos);
            support.swap_remove(pos);
        } else {
            alpha[away] -= step;
        }
        if iterations % 64 == 63 {
            // Refresh the residual to stop drift from incremental updates.
            r.copy_from_slice(query);
            r.iter_mut().for_each(|v| *v = -*v);
            for &k in &support {
                axpy(alpha[k], view.point(k), &mut r);
            }
        } else {
            axpy(step, &dir, &mut r);
        }
    }
    Ok(IterState::from_dense(&alpha, spent, false))
}
