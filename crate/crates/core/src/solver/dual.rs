//! Dual active-set method: Wolfe's minimum-norm-point algorithm on the
//! translated rows `P_i = D_i - x`.
//!
//! The corral `S` stays affinely independent, and the Gram system
//! `(1 1' + P_S' P_S) v = 1` is kept as an upper-triangular Cholesky factor
//! updated in place when rows enter or leave.

use super::{HullView, IterState, SolveError, SolverConfig};
use crate::matrix::{axpy, dot};

/// Relative pivot under which an entering row counts as affinely dependent.
const DEPENDENCE_RTOL: f64 = 1e-12;

pub(crate) fn solve(
    view: &HullView<'_>,
    query: &[f64],
    config: &SolverConfig,
    init: &[(usize, f64)],
) -> Result<IterState, SolveError> {
    let m = view.len();
    let mut corral = Corral::default();
    for &(k, a) in init {
        let p = translated(view, k, query);
        corral.try_push(k, p, a);
    }
    if corral.members.is_empty() {
        return Err(SolveError::NumericBreakdown("initial support is degenerate".into()));
    }
    corral.normalize();
    corral.minor_cycle()?;

    let mut w = vec![0.0; query.len()];
    let mut iterations = 0;
    loop {
        corral.point(&mut w);
        let xw = dot(query, &w);
        let ww = dot(&w, &w);
        let (mut entering, mut lowest) = (0, f64::INFINITY);
        for k in 0..m {
            let q = dot(view.point(k), &w) - xw;
            if q < lowest {
                lowest = q;
                entering = k;
            }
        }
        if !lowest.is_finite() {
            return Err(SolveError::NumericBreakdown("non-finite pricing".into()));
        }
        if config.settled(ww - lowest, ww) {
            return Ok(corral.state(iterations, true));
        }
        if iterations >= config.max_iter || corral.members.contains(&entering) {
            return Ok(corral.state(iterations, false));
        }
        iterations += 1;
        if !corral.try_push(entering, translated(view, entering, query), 0.0) {
            return Ok(corral.state(iterations, false));
        }
        corral.minor_cycle()?;
    }
}

fn translated(view: &HullView<'_>, k: usize, query: &[f64]) -> Vec<f64> {
    view.point(k).iter().zip(query).map(|(a, b)| a - b).collect()
}

#[derive(Default)]
struct Corral {
    members: Vec<usize>,
    points: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    /// Columns of the upper-triangular factor; column `j` has `j + 1` entries.
    cols: Vec<Vec<f64>>,
}

impl Corral {
    fn try_push(&mut self, k: usize, p: Vec<f64>, weight: f64) -> bool {
        let n = self.cols.len();
        let c = 1.0 + dot(&p, &p);
        let mut r = Vec::with_capacity(n + 1);
        for i in 0..n {
            let b = 1.0 + dot(&self.points[i], &p);
            let s: f64 = (0..i).map(|j| self.cols[i][j] * r[j]).sum();
            r.push((b - s) / self.cols[i][i]);
        }
        let rho2 = c - dot(&r, &r);
        if !(rho2 > DEPENDENCE_RTOL * c) {
            return false;
        }
        r.push(rho2.sqrt());
        self.cols.push(r);
        self.members.push(k);
        self.points.push(p);
        self.lambda.push(weight);
        true
    }

    fn remove(&mut self, at: usize) {
        self.members.remove(at);
        self.points.remove(at);
        self.lambda.remove(at);
        self.cols.remove(at);
        let n = self.cols.len();
        // Columns right of `at` now carry one subdiagonal entry each.
        for j in at..n {
            let (a, b) = (self.cols[j][j], self.cols[j][j + 1]);
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            self.cols[j][j] = h;
            self.cols[j].pop();
            for l in j + 1..n {
                let (x, y) = (self.cols[l][j], self.cols[l][j + 1]);
                self.cols[l][j] = c * x + s * y;
                self.cols[l][j + 1] = -s * x + c * y;
            }
        }
    }

    /// Barycentric weights of the minimum-norm point of the affine hull.
    fn affine_minimizer(&self) -> Vec<f64> {
        let n = self.cols.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.cols[i][j] * y[j]).sum();
            y[i] = (1.0 - s) / self.cols[i][i];
        }
        let mut v = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.cols[j][i] * v[j]).sum();
            v[i] = (y[i] - s) / self.cols[i][i];
        }
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        v
    }

    fn minor_cycle(&mut self) -> Result<(), SolveError> {
        loop {
            let mu = self.affine_minimizer();
            if mu.iter().any(|v| !v.is_finite()) {
                return Err(SolveError::NumericBreakdown("singular corral system".into()));
            }
            if mu.iter().all(|&v| v > 0.0) {
                self.lambda = mu;
                return Ok(());
            }
            let mut theta = 1.0;
            let mut blocking = 0;
            for (i, (&l, &u)) in self.lambda.iter().zip(&mu).enumerate() {
                if u <= 0.0 {
                    let t = if l - u > 0.0 { l / (l - u) } else { 0.0 };
                    if t < theta {
                        theta = t;
                        blocking = i;
                    }
                }
            }
            for (l, u) in self.lambda.iter_mut().zip(&mu) {
                *l += theta * (u - *l);
            }
            self.lambda[blocking] = 0.0;
            for i in (0..self.members.len()).rev() {
                if self.lambda[i] <= 0.0 {
                    self.remove(i);
                }
            }
            if self.members.is_empty() {
                return Err(SolveError::NumericBreakdown("corral emptied".into()));
            }
            self.normalize();
        }
    }

    fn normalize(&mut self) {
        let total: f64 = self.lambda.iter().sum();
        if total > 0.0 {
            self.lambda.iter_mut().for_each(|l| *l /= total);
        } else {
            let n = self.lambda.len() as f64;
            self.lambda.iter_mut().for_each(|l| *l = 1.0 / n);
        }
    }

    fn point(&self, w: &mut [f64]) {
        w.iter_mut().for_each(|v| *v = 0.0);
        for (p, &l) in self.points.iter().zip(&self.lambda) {
            axpy(l, p, w);
        }
    }

    fn state(&self, iterations: usize, converged: bool) -> IterState {
        let alpha = self.members.iter().copied().zip(self.lambda.iter().copied()).collect();
        IterState { alpha, iterations, converged }
    }
}
