//! Dense complex linear algebra used by every simulator: exponentials,
//! commutators, norms, Pauli matrices, and Hermitian eigendecompositions.
//!
//! All operators are `nalgebra` dense matrices over `Complex64`. Dimensions
//! stay small (d <= 64), so nothing here tries to be clever about storage.

mod models;
mod schedule;

pub use models::{model_hamiltonian, ModelName, ModelSpec};
pub use schedule::{OperatorSchedule, TimeGrid};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn zeros(d: usize) -> CMatrix {
    CMatrix::zeros(d, d)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)])
}

/// Diagonal matrix with real entries.
pub fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| re(v)),
    ))
}

/// |a><b|
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// Projector onto the computational basis state `k` of a d-level system.
pub fn basis_projector(d: usize, k: usize) -> CMatrix {
    let mut p = zeros(d);
    p[(k, k)] = re(1.0);
    p
}

pub fn basis_vector(d: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[k] = re(1.0);
    v
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    if is_finite(a) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput)
    }
}

pub fn ensure_square_dims(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.shape() != b.shape() {
        return Err(Error::DimMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(())
}

/// AB - BA.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_square_dims(a, b)?;
    Ok(a * b - b * a)
}

/// AB + BA.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Operator (spectral) norm: the largest singular value.
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Trace norm: sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    a.singular_values().sum()
}

/// ||A - A^dag|| in operator norm.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    op_norm(&(a - a.adjoint()))
}

/// ||P^2 - P|| in operator norm.
pub fn idempotence_defect(p: &CMatrix) -> f64 {
    op_norm(&(p * p - p))
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * re(0.5)
}

pub fn anti_hermitian_part(a: &CMatrix) -> CMatrix {
    (a - a.adjoint()) * re(0.5)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.trace()
}

/// <v|A|v>
pub fn expectation(a: &CMatrix, v: &CVector) -> C64 {
    v.dotc(&(a * v))
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// The input is symmetrized first so that tiny anti-Hermitian noise is ignored.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(h).symmetric_eigen();
    let d = h.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(h: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(h)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Apply a scalar function to a Hermitian matrix through its spectrum.
pub fn hermitian_function(h: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let (vals, vecs) = eigh(h);
    let fd = CVector::from_iterator(vals.len(), vals.iter().map(|&x| f(x)));
    &vecs * CMatrix::from_diagonal(&fd) * vecs.adjoint()
}

/// exp(scale * H) for Hermitian H, via eigendecomposition. Exact for any
/// complex `scale` because H is normal.
pub fn expm_hermitian(h: &CMatrix, scale: C64) -> CMatrix {
    hermitian_function(h, |x| (scale * x).exp())
}

/// exp(scale * A) for a general square matrix (Pade scaling-and-squaring).
pub fn expm_general(a: &CMatrix, scale: C64) -> CMatrix {
    (a * scale).exp()
}

/// exp(scale * A). Hermitian inputs go through the eigendecomposition, all
/// others through scaling-and-squaring.
pub fn matrix_exponential(a: &CMatrix, scale: C64) -> Result<CMatrix> {
    ensure_finite(a)?;
    if !(scale.re.is_finite() && scale.im.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if a.nrows() != a.ncols() {
        return Err(Error::DimMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let scale_norm = a.norm() * scale.norm();
    if !scale_norm.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let herm = hermiticity_defect(a) <= 1e-14 * op_norm(a).max(f64::MIN_POSITIVE);
    if herm {
        Ok(expm_hermitian(a, scale))
    } else {
        Ok(expm_general(a, scale))
    }
}

/// exp(-i H dt) for Hermitian H.
pub fn unitary_step(h: &CMatrix, dt: f64) -> CMatrix {
    expm_hermitian(h, c(0.0, -dt))
}

/// Principal square root of a positive semidefinite matrix; eigenvalues
/// below zero (numerical drift) are clipped.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    hermitian_function(a, |x| re(x.max(0.0).sqrt()))
}

/// Normalize a vector to unit 2-norm.
pub fn normalized(v: &CVector) -> CVector {
    v / re(v.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    // power series summed until terms vanish in double precision
    fn expm_series(a: &CMatrix, scale: C64) -> CMatrix {
        let x = a * scale;
        let mut term = identity(a.nrows());
        let mut sum = term.clone();
        for k in 1..200 {
            term = &term * &x / re(k as f64);
            sum += &term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    }

    macro_rules! assert_close {
        ($a:expr, $b:expr, $tol:expr) => {
            let d = op_norm(&($a - $b));
            assert!(d <= $tol, "deviation {d:e} > {:e}", $tol);
        };
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = matrix_exponential(&zeros(4), c(0.0, -0.1)).unwrap();
        assert_close!(&e, &identity(4), 1e-15);
    }

    #[test]
    fn exp_of_sigma_z() {
        let e = matrix_exponential(&sigma_z(), c(0.0, -std::f64::consts::FRAC_PI_2)).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.0, -1.0), re(0.0), re(0.0), c(0.0, 1.0)]);
        assert_close!(&e, &expected, 1e-15);
    }

    #[test]
    fn exp_of_sigma_x_matches_series_and_closed_form() {
        let theta = 0.3;
        let e = matrix_exponential(&sigma_x(), c(0.0, -theta)).unwrap();
        let series = expm_series(&sigma_x(), c(0.0, -theta));
        let closed = identity(2) * re(theta.cos()) - sigma_x() * c(0.0, theta.sin());
        assert_close!(&e, &series, 1e-15);
        assert_close!(&e, &closed, 1e-15);
    }

    #[test]
    fn general_exponential_matches_series() {
        // non-normal generator exercises the Pade branch
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.1, -0.5),
                c(0.3, 0.2),
                re(0.0),
                re(0.0),
                c(-0.2, 0.1),
                c(0.7, 0.0),
                c(0.4, 0.4),
                re(0.0),
                c(0.0, -1.0),
            ],
        );
        let e = matrix_exponential(&a, c(0.0, -1.3)).unwrap();
        let s = expm_series(&a, c(0.0, -1.3));
        assert!(op_norm(&(&e - &s)) <= 1e-13 * op_norm(&s));
    }

    #[test]
    fn exponential_rejects_nan() {
        let mut a = sigma_x();
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(
            matrix_exponential(&a, c(0.0, -1.0)),
            Err(Error::NonFiniteInput)
        ));
    }

    #[test]
    fn pauli_commutator() {
        let k = commutator(&sigma_x(), &sigma_y()).unwrap();
        assert_close!(&k, &(sigma_z() * c(0.0, 2.0)), 1e-15);
    }

    #[test]
    fn commutator_with_self_vanishes() {
        let a = CMatrix::from_fn(3, 3, |i, j| c(i as f64 + 0.5 * j as f64, (i * j) as f64 - 1.0));
        assert_eq!(op_norm(&commutator(&a, &a).unwrap()), 0.0);
    }

    #[test]
    fn commutator_diag_with_sigma_x() {
        // [diag(1,2), sx] = (0, -1; 1, 0) by direct multiplication
        let k = commutator(&diag(&[1.0, 2.0]), &sigma_x()).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[re(0.0), re(-1.0), re(1.0), re(0.0)]);
        assert_close!(&k, &expected, 0.0);
    }

    #[test]
    fn commutator_dim_mismatch() {
        assert!(matches!(
            commutator(&identity(2), &identity(3)),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn unitary_step_is_unitary() {
        let h = sigma_x() * re(0.7) + sigma_z() * re(-1.1);
        let u = unitary_step(&h, 0.37);
        assert_close!(&(u.adjoint() * &u), &identity(2), 1e-14);
    }

    #[test]
    fn eigh_sorts_ascending() {
        let (vals, vecs) = eigh(&diag(&[3.0, -1.0, 2.0]));
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
        assert!((vecs[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norms() {
        assert!((op_norm(&(sigma_x() * re(3.0))) - 3.0).abs() < 1e-14);
        assert!((trace_norm(&sigma_z()) - 2.0).abs() < 1e-14);
    }
}
