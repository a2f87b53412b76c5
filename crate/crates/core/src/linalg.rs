//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor applied when forming matrix square roots.
pub const EIGEN_FLOOR: f64 = 1e-14;

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `max |a_ij - a_ji|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Replaces `a` with `(a + a')/2` in place.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// `log det(a)` for a symmetric positive definite matrix, via Cholesky.
pub fn log_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not symmetric positive definite".into()))?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>())
}

pub fn is_spd(a: &DMatrix<f64>) -> bool {
    a.is_square() && a.clone().cholesky().is_some()
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a)
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `(A^{1/2}, A^{-1/2})` of a symmetric positive definite matrix.
///
/// Eigenvalues below `EIGEN_FLOOR * lambda_max` are lifted to the floor.
pub fn sym_sqrt_pair(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !a.is_square() {
        return Err(Error::InvalidInput("square matrix required".into()));
    }
    let eig = SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(*v));
    if top <= 0.0 || eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "weight matrix is not positive definite".into(),
        ));
    }
    let floor = EIGEN_FLOOR * top;
    let q = &eig.eigenvectors;
    let root = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|v| v.max(floor).sqrt()),
    );
    let inv_root = root.map(|v| 1.0 / v);
    let mut sqrt = q * DMatrix::from_diagonal(&root) * q.transpose();
    let mut inv_sqrt = q * DMatrix::from_diagonal(&inv_root) * q.transpose();
    symmetrize(&mut sqrt);
    symmetrize(&mut inv_sqrt);
    Ok((sqrt, inv_sqrt))
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not symmetric positive definite".into()))?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// `x' A y` without allocating the intermediate product.
pub fn quad_form(a: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        let col = a.column(j);
        acc += y[j] * col.dot(x);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_pair_reconstructs_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let (r, ir) = sym_sqrt_pair(&a).unwrap();
        assert!(max_abs(&(&r * &r - &a)) <= 1e-10 * max_abs(&a));
        assert!(max_abs(&(&r * &ir - DMatrix::identity(3, 3))) <= 1e-12);
    }

    #[test]
    fn log_det_matches_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let expected: f64 = sym_eigenvalues(&a).iter().map(|v| v.ln()).sum();
        assert!((log_det_spd(&a).unwrap() - expected).abs() < 1e-14);
        assert!(log_det_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn quad_form_agrees_with_products() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let x = DVector::from_vec(vec![1.0, -2.0]);
        let y = DVector::from_vec(vec![0.5, 3.0]);
        assert!((quad_form(&a, &x, &y) - x.dot(&(&a * &y))).abs() < 1e-14);
    }
}
