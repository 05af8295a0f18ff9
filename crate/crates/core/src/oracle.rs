//! Brute-force references: fine midpoint propagation with a refinement
//! self-check, and channel comparison on a complete operator basis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{c, hermitian_part, identity, op_norm, re, unitary_step, CMatrix, CVector, OperatorSchedule, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Oracle steps per scenario step.
    pub refinement: usize,
    /// Largest allowed change when the refinement is doubled.
    pub tolerance: f64,
    /// 2: midpoint exponentials. 4: two-point Gauss Magnus steps.
    pub order: u8,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            refinement: 100,
            tolerance: 1e-9,
            order: 2,
        }
    }
}

impl OracleConfig {
    pub fn with_refinement(refinement: usize) -> Result<Self> {
        let cfg = Self {
            refinement,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.refinement < 10 {
            return Err(Error::InvalidParam {
                name: "refinement".into(),
                reason: format!("must be at least 10, got {}", self.refinement),
            });
        }
        if self.order != 2 && self.order != 4 {
            return Err(Error::InvalidParam {
                name: "order".into(),
                reason: format!("must be 2 or 4, got {}", self.order),
            });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParam {
                name: "tolerance".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

fn ensure_hermitian(h: &OperatorSchedule) -> Result<()> {
    if !h.is_hermitian() {
        return Err(Error::InvalidParam {
            name: "generator".into(),
            reason: "oracle propagation needs a Hermitian schedule".into(),
        });
    }
    Ok(())
}

/// exp(-i Omega) for one step of the fourth-order Magnus expansion with
/// Gauss nodes: Omega = dt (H1 + H2)/2 + i sqrt3/12 dt^2 [H1, H2].
fn magnus4_step(h: &OperatorSchedule, t: f64, dt: f64) -> CMatrix {
    let s = 3f64.sqrt() / 6.0;
    let h1 = h.eval(t + (0.5 - s) * dt);
    let h2 = h.eval(t + (0.5 + s) * dt);
    let comm = &h1 * &h2 - &h2 * &h1;
    let omega = (&h1 + &h2) * re(0.5 * dt) + comm * c(0.0, 3f64.sqrt() / 12.0 * dt * dt);
    unitary_step(&hermitian_part(&omega), 1.0)
}

/// Time-ordered product of one-step propagators over `fine` steps, sampled
/// at every multiple of `stride`.
fn propagate(h: &OperatorSchedule, fine: &TimeGrid, stride: usize, v0: CMatrix, order: u8) -> Vec<CMatrix> {
    let dt = fine.dt();
    let mut out = Vec::with_capacity(fine.steps() / stride + 1);
    let mut u = v0;
    out.push(u.clone());
    for k in 0..fine.steps() {
        let step = if order == 4 {
            magnus4_step(h, fine.t(k), dt)
        } else {
            unitary_step(&h.eval(fine.midpoint(k)), dt)
        };
        u = step * u;
        if (k + 1) % stride == 0 || k + 1 == fine.steps() {
            out.push(u.clone());
        }
    }
    out
}

/// Propagator U(T, 0) of `h` at R-fold refinement of `grid`. Fails with
/// NonConvergence when 2R moves the result by more than the tolerance.
pub fn reference_unitary(h: &OperatorSchedule, grid: &TimeGrid, cfg: &OracleConfig) -> Result<CMatrix> {
    Ok(reference_path(h, grid, cfg, identity(h.dim()))?
        .pop()
        .expect("path is never empty"))
}

/// U(t_k, 0) v0 at every point of `grid`. The refinement check compares the
/// final values only, so cost stays at three fine passes.
pub fn reference_path(
    h: &OperatorSchedule,
    grid: &TimeGrid,
    cfg: &OracleConfig,
    v0: CMatrix,
) -> Result<Vec<CMatrix>> {
    cfg.validate()?;
    ensure_hermitian(h)?;
    if v0.nrows() != h.dim() {
        return Err(Error::DimMismatch {
            expected: h.dim(),
            found: v0.nrows(),
        });
    }
    let fine = grid.refined(cfg.refinement);
    let path = propagate(h, &fine, cfg.refinement, v0.clone(), cfg.order);
    let check = propagate(h, &grid.refined(2 * cfg.refinement), usize::MAX, v0, cfg.order)
        .into_iter()
        .last()
        .expect("path is never empty");
    let change = op_norm(&(path.last().expect("path is never empty") - check));
    if change > cfg.tolerance {
        return Err(Error::NonConvergence { change });
    }
    Ok(path)
}

/// psi(t_k) = U(t_k, 0) psi0 at every point of `grid`.
pub fn reference_states(
    h: &OperatorSchedule,
    grid: &TimeGrid,
    cfg: &OracleConfig,
    psi0: &CVector,
) -> Result<Vec<CVector>> {
    let v0 = CMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice());
    Ok(reference_path(h, grid, cfg, v0)?
        .into_iter()
        .map(|m| m.column(0).into_owned())
        .collect())
}

/// Hermitian basis of d x d matrices, orthonormal under Tr(A^dag B):
/// E_jj, (E_jk + E_kj)/sqrt2 and i(E_jk - E_kj)/sqrt2.
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in j..d {
            if j == k {
                let mut e = CMatrix::zeros(d, d);
                e[(j, j)] = re(1.0);
                out.push(e);
            } else {
                let mut sym = CMatrix::zeros(d, d);
                sym[(j, k)] = re(s);
                sym[(k, j)] = re(s);
                out.push(sym);
                let mut asym = CMatrix::zeros(d, d);
                asym[(j, k)] = c(0.0, s);
                asym[(k, j)] = c(0.0, -s);
                out.push(asym);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TomographyReport {
    pub basis_size: usize,
    /// max over basis elements and matrix entries of |A(E) - B(E)|
    pub max_deviation: f64,
}

/// Compares two linear maps on every element of the Hermitian basis.
pub fn channel_tomography<A, B>(a: A, b: B, d: usize) -> TomographyReport
where
    A: Fn(&CMatrix) -> CMatrix + Sync,
    B: Fn(&CMatrix) -> CMatrix + Sync,
{
    let basis = hermitian_basis(d);
    let max_deviation = basis
        .par_iter()
        .map(|e| {
            (a(e) - b(e))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    TomographyReport {
        basis_size: basis.len(),
        max_deviation,
    }
}
