//! Singular value decomposition by one-sided Jacobi rotations. Tall inputs
//! are reduced by a Householder QR first.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(values) V^T`, values descending.
#[derive(Debug, Clone)]
pub(crate) struct Svd {
    pub values: Vec<f64>,
    /// `m x r`, `r = min(m, n)`.
    pub u: DMatrix<f64>,
    /// `n x r`.
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Svd { values: Vec::new(), u: DMatrix::zeros(m, 0), v: DMatrix::zeros(n, 0) };
        }
        if m < n {
            let t = Svd::new(&a.transpose());
            return Svd { values: t.values, u: t.v, v: t.u };
        }
        if m > n {
            let (q, r) = a.clone().qr().unpack();
            let inner = jacobi(r);
            return Svd { values: inner.values, u: q * inner.u, v: inner.v };
        }
        jacobi(a.clone())
    }

    /// Minimum-norm least-squares solution, treating values at or below
    /// `cutoff` as zero.
    pub fn solve(&self, rhs: &DVector<f64>, cutoff: f64) -> DVector<f64> {
        let mut coef = self.u.tr_mul(rhs);
        for (c, &s) in coef.iter_mut().zip(&self.values) {
            *c = if s > cutoff { *c / s } else { 0.0 };
        }
        &self.v * coef
    }

    pub fn rank(&self, cutoff: f64) -> usize {
        self.values.iter().filter(|&&s| s > cutoff).count()
    }
}

/// One-sided Jacobi on a matrix with at least as many rows as columns.
fn jacobi(mut u: DMatrix<f64>) -> Svd {
    let (m, n) = u.shape();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s, m);
                rotate(&mut v, p, q, c, s, n);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (u.column(j).norm(), j)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let values: Vec<f64> = order.iter().map(|o| o.0).collect();
    let u_out = DMatrix::from_fn(m, n, |i, k| {
        let (s, j) = order[k];
        if s > 0.0 {
            u[(i, j)] / s
        } else {
            0.0
        }
    });
    let v_out = DMatrix::from_fn(n, n, |i, k| v[(i, order[k].1)]);
    Svd { values, u: u_out, v: v_out }
}

fn rotate(a: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64, rows: usize) {
    for i in 0..rows {
        let ap = a[(i, p)];
        let aq = a[(i, q)];
        a[(i, p)] = c * ap - s * aq;
        a[(i, q)] = s * ap + c * aq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &DMatrix<f64>) {
        let svd = Svd::new(a);
        let r = a.nrows().min(a.ncols());
        assert_eq!(svd.values.len(), r);
        assert!(svd.values.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = &svd.u * DMatrix::from_diagonal(&DVector::from_vec(svd.values.clone())) * svd.v.transpose();
        assert!((rebuilt - a).abs().max() < 1e-12 * (1.0 + a.abs().max()));
        let fro: f64 = a.iter().map(|x| x * x).sum();
        let sv: f64 = svd.values.iter().map(|s| s * s).sum();
        assert!((fro - sv).abs() < 1e-12 * fro.max(1.0));
    }

    #[test]
    fn duplicated_column_keeps_exact_spectrum() {
        let a = DMatrix::from_row_slice(5, 3, &[1., 2., 1., 0., 1., 0., 3., -1., 3., 2., 2., 2., -1., 0., -1.]);
        check(&a);
        let svd = Svd::new(&a);
        assert!(svd.values[2] < 1e-14 * svd.values[0]);
    }

    #[test]
    fn wide_square_and_zero_inputs() {
        check(&DMatrix::from_row_slice(2, 4, &[1., 0., 2., 3., 0., 1., -1., 1.]));
        check(&DMatrix::from_row_slice(3, 3, &[2., 0., 0., 0., 0., 0., 0., 0., 1.]));
        check(&DMatrix::zeros(4, 2));
    }

    #[test]
    fn diagonal_values_are_sorted() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 3.0]));
        assert_eq!(Svd::new(&a).values, vec![5.0, 3.0, 1.0]);
    }

    #[test]
    fn solve_returns_minimum_norm_solution() {
        // Two identical columns: x1 + x2 = 2 has minimum-norm solution (1, 1).
        let a = DMatrix::from_row_slice(2, 2, &[1., 1., 1., 1.]);
        let svd = Svd::new(&a);
        let x = svd.solve(&DVector::from_vec(vec![2.0, 2.0]), 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
