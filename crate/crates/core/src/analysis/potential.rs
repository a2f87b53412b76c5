use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::log_det_spd;

/// `omega(x) = x - log(1 + x)` on `x > -1`.
pub fn omega(x: f64) -> Result<f64> {
    if !(x > -1.0) || !x.is_finite() {
        return Err(Error::Domain(format!("omega is undefined at {x}")));
    }
    Ok(x - x.ln_1p())
}

/// `Psi(A) = tr(A) - d - log det(A)`.
pub fn psi(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::InvalidInput("psi needs a square matrix".into()));
    }
    Ok(a.trace() - a.nrows() as f64 - log_det_spd(a)?)
}

/// `Psi(P^{-1/2} B P^{-1/2}) = tr(P^{-1} B) - d - log det B + log det P`.
pub fn psi_weighted(b: &DMatrix<f64>, p_inv: &DMatrix<f64>, log_det_p: f64) -> Result<f64> {
    if b.shape() != p_inv.shape() || !b.is_square() {
        return Err(Error::InvalidInput("psi_weighted shape mismatch".into()));
    }
    let tr = p_inv.component_mul(b).sum();
    Ok(tr - b.nrows() as f64 - log_det_spd(b)? + log_det_p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_values() {
        assert_eq!(omega(0.0).unwrap(), 0.0);
        assert!((omega(1.0).unwrap() - 0.306_852_819_440_054_7).abs() < 1e-15);
        assert!((omega(-0.125).unwrap() - 0.008_531_392_624_522_62).abs() < 1e-15);
        assert!(omega(-1.0).is_err());
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi(&DMatrix::identity(3, 3)).unwrap(), 0.0);
        let quarter = DMatrix::from_diagonal_element(2, 2, 0.25);
        assert!((psi(&quarter).unwrap() - 1.272_588_722_239_781_2).abs() < 1e-14);
        let two = DMatrix::from_diagonal_element(2, 2, 2.0);
        assert!((psi(&two).unwrap() - 0.613_705_638_880_109_4).abs() < 1e-14);
        assert!(psi(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn weighted_psi_matches_explicit_congruence() {
        let b = DMatrix::from_row_slice(2, 2, &[3.0, 0.4, 0.4, 1.5]);
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let (_, ir) = crate::linalg::sym_sqrt_pair(&p).unwrap();
        let explicit = psi(&(&ir * &b * &ir)).unwrap();
        let p_inv = crate::linalg::spd_inverse(&p).unwrap();
        let fast = psi_weighted(&b, &p_inv, log_det_spd(&p).unwrap()).unwrap();
        assert!((explicit - fast).abs() < 1e-12);
    }
}
