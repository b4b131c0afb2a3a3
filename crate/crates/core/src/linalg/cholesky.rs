use crate::error::{numerical, Result};
use crate::matrix::Matrix;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
///
/// Returns `None` when a pivot is not strictly positive.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = libm::sqrt(d);
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Cholesky with escalating diagonal jitter.
///
/// Tries the plain factorization first, then adds `jitter · mean(diag)` for
/// jitter in 1e-12, 1e-11, …, 1e-6.
pub fn cholesky_with_jitter(a: &Matrix) -> Result<Matrix> {
    if let Some(l) = cholesky(a) {
        return Ok(l);
    }
    let n = a.rows();
    let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n.max(1) as f64;
    let mut jitter = 1e-12;
    while jitter <= 1e-6 {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter * mean_diag;
        }
        if let Some(l) = cholesky(&b) {
            return Ok(l);
        }
        jitter *= 10.0;
    }
    Err(numerical!(
        "covariance is not positive definite even with jitter {:e}",
        jitter / 10.0
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_matrix() {
        let a = Matrix::from_fn(5, 5, |i, j| libm::exp(-((i as f64) - (j as f64)).abs() / 2.0));
        let l = cholesky(&a).unwrap();
        let err = l.matmul(&l.transpose()).sub(&a).frobenius_norm();
        assert!(err < 1e-13);
    }

    #[test]
    fn singular_matrix_needs_jitter() {
        let a = Matrix::filled(3, 3, 1.0);
        assert!(cholesky(&a).is_none());
        assert!(cholesky_with_jitter(&a).is_ok());
    }

    #[test]
    fn indefinite_matrix_fails() {
        let mut a = Matrix::identity(2);
        a[(1, 1)] = -1.0;
        let err = cholesky_with_jitter(&a).unwrap_err();
        assert!(matches!(err, crate::Error::NumericalFailure(_)));
    }
}
