//! Householder QR with column pivoting (Businger-Golub).

/// Column order chosen by pivoted QR on an `m x n` row-major matrix, plus
/// the absolute diagonal of `R` in pivot order. Late pivots span the least
/// new column space.
pub fn pivoted_qr(data: &[f64], m: usize, n: usize) -> (Vec<usize>, Vec<f64>) {
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| data[i * n + j]).collect()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut diag = Vec::with_capacity(n.min(m));
    for k in 0..n.min(m) {
        // Norms of the trailing parts are recomputed exactly; downdating
        // loses accuracy on the nearly dependent columns that matter here.
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..n {
            let s: f64 = cols[j][k..].iter().map(|v| v * v).sum();
            if s > best_norm {
                best_norm = s;
                best = j;
            }
        }
        cols.swap(k, best);
        order.swap(k, best);

        let x = &cols[k][k..];
        let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        diag.push(alpha);
        if alpha == 0.0 {
            continue;
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = x.to_vec();
        v[0] += sign * alpha;
        let vv: f64 = v.iter().map(|a| a * a).sum();
        for col in cols.iter_mut().skip(k) {
            let tail = &mut col[k..];
            let s: f64 = tail.iter().zip(&v).map(|(a, b)| a * b).sum();
            let f = 2.0 * s / vv;
            tail.iter_mut().zip(&v).for_each(|(a, b)| *a -= f * b);
        }
    }
    for _ in diag.len()..n {
        diag.push(0.0);
    }
    (order, diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_column_is_pivoted_last() {
        // Columns: a, b, a.
        let rows = [[1.0, 0.0, 1.0], [2.0, 1.0, 2.0], [0.0, 3.0, 0.0], [1.0, 1.0, 1.0]];
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let (order, diag) = pivoted_qr(&data, 4, 3);
        assert!(order[2] == 0 || order[2] == 2);
        assert!(diag[2] < 1e-12);
    }

    #[test]
    fn zero_column_is_pivoted_last() {
        let rows = [[1.0, 0.0, 2.0], [0.0, 0.0, 1.0], [3.0, 0.0, 0.0]];
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let (order, diag) = pivoted_qr(&data, 3, 3);
        assert_eq!(order[2], 1);
        assert_eq!(diag[2], 0.0);
    }
}
