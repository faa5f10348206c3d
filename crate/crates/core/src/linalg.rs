//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

/// Thin QR with the diagonal of R forced positive. Returns `None` when the
/// columns are numerically rank deficient.
pub(crate) fn orthonormalize(g: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let cols = g.ncols();
    let scale = g.norm().max(f64::MIN_POSITIVE);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let rjj = r[(j, j)];
        if rjj.abs() <= 1e-10 * scale {
            return None;
        }
        if rjj < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Some(q)
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Extreme eigenvalues of a symmetric matrix.
pub(crate) fn sym_eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues;
    (vals.min(), vals.max())
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub(crate) fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (lo, hi) = sym_eigen_range(m);
    lo.abs().max(hi.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_sign_fix_gives_positive_diagonal() {
        let g = DMatrix::from_row_slice(3, 2, &[-1.0, 2.0, 0.5, -1.0, 2.0, 0.3]);
        let q = orthonormalize(g.clone()).unwrap();
        let r = q.transpose() * &g;
        assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(orthonormalize(g).is_none());
    }

    #[test]
    fn norms_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-3.0, 2.0]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
        assert!((sym_spectral_norm(&m) - 3.0).abs() < 1e-12);
        let (lo, hi) = sym_eigen_range(&m);
        assert!((lo + 3.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    }
}
