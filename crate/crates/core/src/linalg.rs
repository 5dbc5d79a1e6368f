//! Small dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_diagonal(a: &DMatrix<f64>) -> f64 {
    a.diagonal().iter().copied().fold(0.0, f64::max)
}

/// Numerically PSD: `λ_min >= -rel_tol * max(1, max diagonal)`.
pub fn is_psd(a: &DMatrix<f64>, rel_tol: f64) -> (bool, f64) {
    let m = min_eigenvalue(a);
    (m >= -rel_tol * max_diagonal(a).max(1.0), m)
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Frobenius inner product.
pub fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
