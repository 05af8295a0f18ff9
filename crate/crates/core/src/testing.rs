//! Random instances for property checks: Hermitian matrices, density
//! matrices, PVMs and smooth constant-rank projector families.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::operators::{c, identity, outer, re, CMatrix, CVector};
use crate::spectral::ProjectorFamily;

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// GUE-like Hermitian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let a = gaussian_matrix(d, d, rng);
    (&a + a.adjoint()) * re(0.5)
}

pub fn random_anti_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let a = gaussian_matrix(d, d, rng);
    (&a - a.adjoint()) * re(0.5)
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let qr = gaussian_matrix(d, d, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        if rjj.norm() > 0.0 {
            let ph = rjj / rjj.norm();
            let col = q.column(j) * ph;
            q.set_column(j, &col);
        }
    }
    q
}

pub fn random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    &v / re(v.norm())
}

/// Full-rank random density matrix (Hilbert-Schmidt measure).
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = gaussian_matrix(d, d, rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Random PVM with `m` sectors on C^d; sector sizes differ by at most one.
pub fn random_pvm<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Vec<CMatrix> {
    assert!(m >= 1 && m <= d, "need 1 <= m <= d");
    let u = random_unitary(d, rng);
    let mut out = Vec::with_capacity(m);
    let mut col = 0;
    for n in 0..m {
        let size = d / m + usize::from(n < d % m);
        let mut p = CMatrix::zeros(d, d);
        for j in col..col + size {
            let v = u.column(j).into_owned();
            p += outer(&v, &v);
        }
        col += size;
        out.push(p);
    }
    out
}

/// Random rank-`rank` projector on C^d.
pub fn random_projector<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> CMatrix {
    let u = random_unitary(d, rng);
    (0..rank).fold(CMatrix::zeros(d, d), |acc, j| {
        let v = u.column(j).into_owned();
        acc + outer(&v, &v)
    })
}

/// Smooth two-sector family {P(t), I - P(t)} with P(t) = e^{tG} P e^{-tG},
/// G random anti-Hermitian, on [0, 1]. Rank is constant and the derivatives
/// are exact.
pub fn random_smooth_family<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> ProjectorFamily {
    let p = random_projector(d, rank, rng);
    let q = identity(d) - &p;
    let g = random_anti_hermitian(d, rng);
    ProjectorFamily::rotated(vec![p, q], g, 1.0).expect("valid random family")
}
