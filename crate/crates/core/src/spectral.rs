//! Spectral radius of entrywise nonnegative matrices.

use alloc::vec;

use crate::linalg::Matrix;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Perron root of a nonnegative matrix by power iteration.
///
/// Iterates on `A + I + eps * J` from the all-ones vector. The unit shift
/// makes periodic matrices (e.g. the two-user Jacobi matrix, eigenvalues
/// `+-a`) primitive, and the `eps = 1e-15 * max|a_ij|` fill makes reducible
/// ones irreducible so the iterate stays strictly positive. Stops when the
/// Collatz-Wielandt bounds `min_i (Mx)_i / x_i <= rho(M) <= max_i (Mx)_i / x_i`
/// are within `tol`, and returns the upper bound otherwise, which never
/// understates the radius.
pub fn spectral_radius_nonnegative(a: &Matrix, tol: f64, max_iter: usize) -> f64 {
    let n = a.dim();
    if n == 0 {
        return 0.0;
    }
    debug_assert!((0..n).all(|i| a.row(i).iter().all(|&v| v >= 0.0)));
    let scale = a.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let eps = 1e-15 * scale;
    let shifted = Matrix::from_fn(n, |i, j| a.get(i, j) + eps + if i == j { 1.0 } else { 0.0 });

    let mut x = vec![1.0; n];
    let mut upper = f64::INFINITY;
    for _ in 0..max_iter {
        let y = shifted.mul_vec(&x);
        let (lo, hi) = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| yi / xi)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            });
        upper = upper.min(hi);
        if hi - lo <= tol {
            return f64::max(0.5 * (hi + lo) - 1.0, 0.0);
        }
        let norm: f64 = y.iter().sum();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    f64::max(upper - 1.0, 0.0)
}
