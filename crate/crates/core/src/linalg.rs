//! Dense complex linear-algebra helpers shared by the estimators.
//!
//! Everything here uses column-major vectorization, which is also nalgebra's
//! storage order, so `vec` is a copy of the underlying slice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative singular-value cutoff used for pseudo-inverses and rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Column-major vectorization.
pub fn vec(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    assert_eq!(v.len(), rows * cols, "unvec: length {} != {rows}x{cols}", v.len());
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == Complex64::default() {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Column-wise Kronecker (Khatri-Rao) product: column `k` is `a[:,k] ⊗ b[:,k]`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            operand: "khatri_rao rhs",
            expected: (b.nrows(), a.ncols()),
            found: b.shape(),
        });
    }
    let (ar, br) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(ar * br, a.ncols());
    for k in 0..a.ncols() {
        for i in 0..ar {
            let s = a[(i, k)];
            for p in 0..br {
                out[(i * br + p, k)] = s * b[(p, k)];
            }
        }
    }
    Ok(out)
}

/// Unnormalized `n`-point DFT matrix, `F[k,l] = exp(-j 2π kl / n)`.
///
/// The exponent is reduced modulo `n` before evaluation so that equal phases
/// produce bit-identical entries.
pub fn dft_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |k, l| unit_phase(-2.0 * PI * ((k * l) % n) as f64 / n as f64))
}

pub fn unit_phase(angle: f64) -> Complex64 {
    Complex64::from_polar(1.0, angle)
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖a − b‖ / ‖b‖`, falling back to the absolute error when `b` vanishes.
pub fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_error: length mismatch");
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let reference = norm_sq(b);
    if reference > 0.0 {
        (diff / reference).sqrt()
    } else {
        diff.sqrt()
    }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    m.clone().singular_values().iter().copied().collect()
}

pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Number of singular values above `rtol` times the largest.
pub fn numerical_rank(m: &CMatrix, rtol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    sv.iter().filter(|&&s| s > rtol * max && s > 0.0).count()
}

/// Pseudo-inverse from the SVD, truncating singular values below
/// `rtol · σ_max`. Returns the pseudo-inverse and the retained rank.
pub fn pseudo_inverse(m: &CMatrix, rtol: f64) -> (CMatrix, usize) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (CMatrix::zeros(cols, rows), 0);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sv = &svd.singular_values;
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = rtol * max;
    let mut rank = 0;
    let mut pinv = CMatrix::zeros(cols, rows);
    for (k, &s) in sv.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        rank += 1;
        let vk = v_t.row(k).adjoint();
        let uk = u.column(k);
        pinv += (vk * uk.adjoint()) * Complex64::from(1.0 / s);
    }
    (pinv, rank)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.adjoint()) * Complex64::from(0.5);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Least-squares solution of `a x = b` restricted to the column space of `a`.
/// Used by the greedy sparse solvers on small supports.
pub fn least_squares(a: &CMatrix, b: &CVector) -> CVector {
    let (pinv, _) = pseudo_inverse(a, RANK_RTOL);
    pinv * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identity_blocks() {
        let a = CMatrix::identity(2, 2);
        let b = CMatrix::from_fn(2, 2, |i, j| c((i * 2 + j) as f64, 0.0));
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(2, 3)], b[(0, 1)]);
        assert_eq!(k[(0, 2)], Complex64::default());
    }

    #[test]
    fn khatri_rao_columns_are_kronecker_of_columns() {
        let a = CMatrix::from_fn(2, 3, |i, j| c(i as f64 + 1.0, j as f64));
        let b = CMatrix::from_fn(3, 3, |i, j| c(j as f64, -(i as f64)));
        let kr = khatri_rao(&a, &b).unwrap();
        for k in 0..3 {
            let expect = kron(&a.columns(k, 1).into_owned(), &b.columns(k, 1).into_owned());
            assert_eq!(kr.column(k).into_owned(), expect.column(0).into_owned());
        }
        assert!(khatri_rao(&a, &CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn vec_is_column_major() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        let v = vec(&m);
        assert_eq!(v[1], c(3.0, 0.0));
        assert_eq!(unvec(&v, 2, 2), m);
    }

    #[test]
    fn pseudo_inverse_reports_rank() {
        let m = CMatrix::from_fn(4, 3, |i, j| c((i + j) as f64, 0.0));
        let (pinv, rank) = pseudo_inverse(&m, RANK_RTOL);
        assert_eq!(rank, 2);
        // Moore-Penrose: A A+ A = A
        let back = &m * &pinv * &m;
        assert!(relative_error(back.as_slice(), m.as_slice()) < 1e-12);
    }

    #[test]
    fn dft_rows_are_orthogonal() {
        let f = dft_matrix(5);
        let g = &f * f.adjoint();
        let expect = CMatrix::identity(5, 5) * c(5.0, 0.0);
        assert!(relative_error(g.as_slice(), expect.as_slice()) < 1e-14);
    }
}
