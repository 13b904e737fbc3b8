//! Dense matrix helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

/// Singular values in decreasing order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::SvdFailure);
    }
    let mut s: Vec<f64> = if is_real(m) {
        real_part(m).singular_values().iter().copied().collect()
    } else {
        m.clone().singular_values().iter().copied().collect()
    };
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::SvdFailure);
    }
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn spectral_norm(m: &CMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues of a Hermitian matrix in decreasing order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut e: Vec<f64> = if is_real(m) {
        nalgebra::SymmetricEigen::new(real_part(m)).eigenvalues.iter().copied().collect()
    } else {
        nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
    };
    e.sort_by(|a, b| b.total_cmp(a));
    Ok(e)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Builds a matrix from row-major data.
pub fn from_rows(rows: usize, cols: usize, data: &[Complex64]) -> CMatrix {
    CMatrix::from_row_slice(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_singular_values() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, -3.0), c(2.0, 0.0)]));
        assert_eq!(singular_values(&m).unwrap(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn rank_one_complex() {
        let u = [c(1.0, 1.0), c(0.0, 2.0)];
        let v = [c(3.0, 0.0), c(0.0, -4.0)];
        let m = CMatrix::from_fn(2, 2, |i, j| u[i] * v[j].conj());
        let s = singular_values(&m).unwrap();
        assert!((s[0] - 6.0_f64.sqrt() * 5.0).abs() < 1e-12);
        assert!(s[1].abs() < 1e-12);
    }

    #[test]
    fn hermitian_spectrum() {
        let m = from_rows(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let e = hermitian_eigenvalues(&m).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nan_is_rejected() {
        let m = from_rows(1, 1, &[c(f64::NAN, 0.0)]);
        assert!(matches!(singular_values(&m), Err(Error::SvdFailure)));
    }
}
