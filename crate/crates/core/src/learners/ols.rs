use nalgebra::{DMatrix, DVector};

/// Weighted least squares via SVD. Singular values below the usual
/// `max(n, p) * eps * s_max` cutoff are dropped, which yields the minimum-norm
/// solution on rank-deficient designs.
pub(crate) fn weighted_lstsq(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    let (n, p) = x.shape();
    if p == 0 {
        return Vec::new();
    }
    let mut xs = x.clone();
    let mut ys = DVector::from_column_slice(y);
    if let Some(w) = weights {
        for i in 0..n {
            let s = w[i].sqrt();
            xs.row_mut(i).scale_mut(s);
            ys[i] *= s;
        }
    }
    let svd = xs.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return vec![0.0; p];
    }
    let eps = smax * (n.max(p) as f64) * f64::EPSILON;
    let beta = svd.solve(&ys, eps).expect("u and v were computed");
    beta.iter().copied().collect()
}

/// Rank of `x` under the same cutoff used by [`weighted_lstsq`].
pub(crate) fn numerical_rank(x: &DMatrix<f64>) -> usize {
    let (n, p) = x.shape();
    if p == 0 || n == 0 {
        return 0;
    }
    let sv = x.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let eps = smax * (n.max(p) as f64) * f64::EPSILON;
    sv.iter().filter(|&&s| s > eps).count()
}

/// Moore-Penrose inverse of a symmetric positive semi-definite matrix.
pub(crate) fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (n as f64) * f64::EPSILON;
    svd.pseudo_inverse(eps).unwrap_or_else(|_| DMatrix::zeros(n, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_design_gets_minimum_norm() {
        // Two identical columns: any (b, c) with b + c = 2 fits; min-norm is (1, 1).
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = [2.0, 4.0, 6.0];
        let b = weighted_lstsq(&x, &y, None);
        assert!((b[0] - 1.0).abs() < 1e-10 && (b[1] - 1.0).abs() < 1e-10);
        assert_eq!(numerical_rank(&x), 1);
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = [0.0, 1.0, 100.0];
        let b = weighted_lstsq(&x, &y, Some(&[1.0, 1.0, 0.0]));
        assert!((b[0]).abs() < 1e-10 && (b[1] - 1.0).abs() < 1e-10);
    }
}
