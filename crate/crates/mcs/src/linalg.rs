//! Small dense linear-algebra helpers: Cholesky factorization and
//! symmetric-positive-definite solves. Internal to the crate; sized for the
//! small systems that turn up here (ridge normal equations, covariance
//! factors), not for large-scale work.

use ndarray::Array2;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// or `None` if the matrix is not (numerically) positive definite.
pub(crate) fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    // Relative pivot floor: rounding can leave an exactly singular matrix
    // with tiny positive pivots, which must still be rejected.
    let tol = 1e-12 * a.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag.is_finite() && diag > tol) {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / ljj;
        }
    }
    Some(l)
}

/// Solve `A X = B` for symmetric positive-definite `A` via Cholesky.
/// Returns `None` when the factorization fails.
pub(crate) fn solve_spd(a: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let l = cholesky(a)?;
    let n = a.nrows();
    let m = b.ncols();
    debug_assert_eq!(b.nrows(), n);
    let mut x = b.clone();
    // Forward substitution: L Z = B.
    for c in 0..m {
        for i in 0..n {
            let mut v = x[[i, c]];
            for k in 0..i {
                v -= l[[i, k]] * x[[k, c]];
            }
            x[[i, c]] = v / l[[i, i]];
        }
        // Back substitution: L^T X = Z.
        for i in (0..n).rev() {
            let mut v = x[[i, c]];
            for k in (i + 1)..n {
                v -= l[[k, i]] * x[[k, c]];
            }
            x[[i, c]] = v / l[[i, i]];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factor_reconstructs_the_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 5, 12] {
            let b = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
            let a = b.dot(&b.t()) + Array2::<f64>::eye(n) * 0.5;
            let l = cholesky(&a).expect("SPD matrix must factor");
            let back = l.dot(&l.t());
            for (u, v) in a.iter().zip(back.iter()) {
                assert!((u - v).abs() < 1e-10, "reconstruction error {u} vs {v}");
            }
        }
    }

    #[test]
    fn solve_matches_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1usize, 3, 8] {
            let b = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
            let a = b.dot(&b.t()) + Array2::<f64>::eye(n);
            let rhs = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
            let x = solve_spd(&a, &rhs).unwrap();
            let res = a.dot(&x) - &rhs;
            for v in res.iter() {
                assert!(v.abs() < 1e-9, "residual {v}");
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(cholesky(&a).is_none());
        let ind = array![[1.0, 2.0], [2.0, 1.0]]; // indefinite
        assert!(cholesky(&ind).is_none());
    }
}
