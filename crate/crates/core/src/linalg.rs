//! Small dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Mat<T> = DMatrix<T>;
pub type Vector<T> = DVector<T>;

const SCHUR_MAX_ITER: usize = 10_000;

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry<T: Real>(m: &Mat<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize<T: Real>(m: &Mat<T>) -> Mat<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues<T: Real>(m: &Mat<T>) -> Vec<T> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<T> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Smallest eigenvalue of a symmetric matrix; 0 for an empty matrix.
pub fn min_eigenvalue<T: Real>(m: &Mat<T>) -> T {
    symmetric_eigenvalues(m).first().copied().unwrap_or_else(T::zero)
}

/// Largest eigenvalue of a symmetric matrix; 0 for an empty matrix.
pub fn max_eigenvalue<T: Real>(m: &Mat<T>) -> T {
    symmetric_eigenvalues(m).last().copied().unwrap_or_else(T::zero)
}

/// Operator (spectral) norm, computed as the square root of the largest
/// eigenvalue of the smaller Gram matrix.
pub fn op_norm<T: Real>(m: &Mat<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    max_eigenvalue(&gram).max(T::zero()).sqrt()
}

pub fn frobenius<T: Real>(m: &Mat<T>) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

/// PSD test with the tolerance `λ ≥ −1e−10·(1 + trace)`.
pub fn is_psd<T: Real>(m: &Mat<T>) -> bool {
    let tol = T::lit(1e-10) * (T::one() + m.trace().abs());
    min_eigenvalue(m) >= -tol
}

/// Spectral radius via the real Schur form.
pub fn spectral_radius<T: Real>(m: &Mat<T>) -> Result<T> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "spectral_radius",
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if m.nrows() == 0 {
        return Ok(T::zero());
    }
    if m.nrows() == 1 {
        return Ok(m[(0, 0)].abs());
    }
    let schur = Schur::try_new(m.clone(), T::default_epsilon(), SCHUR_MAX_ITER).ok_or(
        Error::EigenFailure {
            context: "spectral_radius",
        },
    )?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .fold(T::zero(), |acc, z| acc.max((z.re * z.re + z.im * z.im).sqrt())))
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix through its
/// eigendecomposition. Eigenvalues at or below `rel_cutoff · λ_max` are
/// treated as zero. Returns the inverse and its rank.
pub fn pinv_symmetric<T: Real>(m: &Mat<T>, rel_cutoff: T) -> (Mat<T>, usize) {
    let n = m.nrows();
    if n == 0 {
        return (Mat::zeros(0, 0), 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let lambda_max = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &v| acc.max(v));
    if lambda_max <= T::zero() {
        return (Mat::zeros(n, n), 0);
    }
    let cutoff = rel_cutoff * lambda_max;
    let mut out = Mat::zeros(n, n);
    let mut rank = 0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cutoff {
            rank += 1;
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) * (T::one() / lam);
        }
    }
    (out, rank)
}

/// Symmetric square root of a PSD matrix.
pub fn sqrt_psd<T: Real>(m: &Mat<T>) -> Mat<T> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut out = Mat::zeros(m.nrows(), m.nrows());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += (v * v.transpose()) * lam.max(T::zero()).sqrt();
    }
    out
}

/// Quadratic form `vᵀ M v`.
pub fn quad_form<T: Real>(m: &Mat<T>, v: &Vector<T>) -> T {
    v.dot(&(m * v))
}

pub(crate) fn check_square<T: Real>(m: &Mat<T>, context: &'static str, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: format!("{n}x{n}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

pub(crate) fn check_shape<T: Real>(
    m: &Mat<T>,
    context: &'static str,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch {
            context,
            expected: format!("{rows}x{cols}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn op_norm_of_rank_one() {
        let mut m = Mat::<f64>::zeros(3, 3);
        m[(0, 0)] = 0.1;
        assert_abs_diff_eq!(op_norm(&m), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn op_norm_rectangular_matches_singular_values() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0]);
        let sv = m.clone().singular_values();
        let expected = sv.iter().cloned().fold(0.0, f64::max);
        assert_abs_diff_eq!(op_norm(&m), expected, epsilon = 1e-12);
    }

    #[test]
    fn spectral_radius_cases() {
        let d = Mat::from_row_slice(2, 2, &[0.3, 0.0, 0.0, -0.9]);
        assert_abs_diff_eq!(spectral_radius(&d).unwrap(), 0.9, epsilon = 1e-12);
        let nil = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(spectral_radius(&nil).unwrap(), 0.0, epsilon = 1e-12);
        let th = std::f64::consts::PI / 6.0;
        let rot = Mat::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]) * 0.9;
        assert_abs_diff_eq!(spectral_radius(&rot).unwrap(), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let (p, rank) = pinv_symmetric(&Mat::<f64>::zeros(2, 2), 1e-12);
        assert_eq!(rank, 0);
        assert_eq!(p, Mat::zeros(2, 2));
    }

    #[test]
    fn pinv_rank_deficient() {
        let m = Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let (p, rank) = pinv_symmetric(&m, 1e-12);
        assert_eq!(rank, 1);
        assert_abs_diff_eq!(p[(0, 0)], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p[(1, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sqrt_psd(&m);
        assert!((&r * &r - &m).abs().max() < 1e-12);
    }
}
