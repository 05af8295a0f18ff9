//! Effective Zeno generators and leakage operators.
//!
//! For a complete family {P_n} the geometric connection is
//! `sum_n P_n' P_n`, which equals `(1/2) sum_n [P_n', P_n]` because
//! `sum_n (P_n' P_n + P_n P_n') = (sum_n P_n)' = 0`. For the two-sector
//! family {P, I - P} it reduces to the single-projector Kato term [P', P].

use crate::error::{Error, Result};
use crate::operators::{
    commutator, hermitian_part, identity, idempotence_defect, op_norm, re, CMatrix,
    OperatorSchedule, TimeGrid, C64, I,
};
use crate::spectral::{DerivativeOrder, EigenFrame, FamilyDefects, ProjectorFamily};

const PROJECTOR_TOL: f64 = 1e-8;

fn ensure_projector(p: &CMatrix) -> Result<()> {
    let defect = idempotence_defect(p);
    if defect > PROJECTOR_TOL {
        Err(Error::NotAProjector { defect })
    } else {
        Ok(())
    }
}

fn ensure_family(ps: &[CMatrix], pdots: &[CMatrix]) -> Result<()> {
    if ps.is_empty() || ps.len() != pdots.len() {
        return Err(Error::FamilyInvalid(format!(
            "{} projectors but {} derivatives",
            ps.len(),
            pdots.len()
        )));
    }
    let ranks: Vec<usize> = ps.iter().map(|p| p.trace().re.round() as usize).collect();
    let d = FamilyDefects::of(ps, &ranks);
    // looser than the family type's own tolerances: callers often pass
    // projectors that went through finite differences
    if d.idempotence > PROJECTOR_TOL || d.orthogonality > PROJECTOR_TOL || d.completeness > PROJECTOR_TOL
    {
        return Err(Error::FamilyInvalid(format!("{d:?}")));
    }
    Ok(())
}

/// Kato-Avron Hamiltonian P H P + i [P', P].
pub fn kato_avron_hamiltonian(h: &CMatrix, p: &CMatrix, pdot: &CMatrix) -> Result<CMatrix> {
    ensure_projector(p)?;
    let k = commutator(pdot, p)?;
    Ok(p * h * p + k * I)
}

/// Geometric connection sum_n P_n' P_n, anti-Hermitian.
pub fn transport_generator(ps: &[CMatrix], pdots: &[CMatrix]) -> Result<CMatrix> {
    ensure_family(ps, pdots)?;
    let d = ps[0].nrows();
    Ok(ps
        .iter()
        .zip(pdots)
        .fold(CMatrix::zeros(d, d), |acc, (p, pd)| acc + pd * p))
}

/// Block-diagonal Zeno Hamiltonian of a complete family:
/// sum_n P_n H P_n + i sum_n P_n' P_n.
pub fn multi_sector_zeno_hamiltonian(
    h: &CMatrix,
    ps: &[CMatrix],
    pdots: &[CMatrix],
) -> Result<CMatrix> {
    let k = transport_generator(ps, pdots)?;
    Ok(pinched_hamiltonian(h, ps) + k * I)
}

/// sum_n P_n H P_n.
pub fn pinched_hamiltonian(h: &CMatrix, ps: &[CMatrix]) -> CMatrix {
    let d = h.nrows();
    ps.iter()
        .fold(CMatrix::zeros(d, d), |acc, p| acc + p * h * p)
}

/// Counterdiabatic term in projector form, i sum_n P_n' P_n.
pub fn cd_term_projector_form(ps: &[CMatrix], pdots: &[CMatrix]) -> Result<CMatrix> {
    Ok(transport_generator(ps, pdots)? * I)
}

/// Counterdiabatic term from eigenvectors,
/// A = i sum_n (|n'><n| - <n|n'> |n><n|), at time `t`.
pub fn cd_term(frame: &EigenFrame, t: f64) -> Result<CMatrix> {
    let (v, vdot) = frame.eigenvector_derivatives(t)?;
    let d = frame.dim();
    let mut a = CMatrix::zeros(d, d);
    for n in 0..d {
        let col = v.column(n).into_owned();
        let dcol = vdot.column(n).into_owned();
        let berry = col.dotc(&dcol);
        a += (&dcol * col.adjoint()) - (&col * col.adjoint()) * berry;
    }
    Ok(a * I)
}

/// Gamma_dt = 2 (P H Q H P + P P' P' P).
pub fn gamma_dt(h: &CMatrix, p: &CMatrix, pdot: &CMatrix) -> Result<CMatrix> {
    ensure_projector(p)?;
    let q = identity(p.nrows()) - p;
    Ok((p * h * &q * h * p + p * pdot * pdot * p) * re(2.0))
}

/// Gamma_kappa = 2 P (H + i[P', P]) Q (H + i[P', P]) P.
pub fn gamma_kappa(h: &CMatrix, p: &CMatrix, pdot: &CMatrix) -> Result<CMatrix> {
    ensure_projector(p)?;
    let q = identity(p.nrows()) - p;
    let g = h + commutator(pdot, p)? * I;
    Ok(p * &g * &q * &g * p * re(2.0))
}

/// Leakage operator seen by an absorber, 2 P (H - i[P', P]) Q (H - i[P', P]) P.
/// Adiabatic elimination of Q psi gives this sign of the connection term;
/// it equals `gamma_dt - gamma_cross` and agrees with `gamma_kappa` whenever
/// Q H P = 0.
pub fn gamma_absorber(h: &CMatrix, p: &CMatrix, pdot: &CMatrix) -> Result<CMatrix> {
    ensure_projector(p)?;
    let q = identity(p.nrows()) - p;
    let g = h - commutator(pdot, p)? * I;
    Ok(p * &g * &q * &g * p * re(2.0))
}

/// Cross term of the leakage decomposition and its operator-norm bound.
#[derive(Debug, Clone)]
pub struct CrossTerm {
    /// 2i (P H Q P' P - P P' Q H P)
    pub gamma: CMatrix,
    /// ||Gamma_cross||
    pub lhs: f64,
    /// 4 ||Q H P|| ||Q P' P||
    pub rhs: f64,
    pub bound_holds: bool,
}

pub fn gamma_cross_and_bound(h: &CMatrix, p: &CMatrix, pdot: &CMatrix) -> Result<CrossTerm> {
    ensure_projector(p)?;
    let q = identity(p.nrows()) - p;
    let gamma = (p * h * &q * pdot * p - p * pdot * &q * h * p) * C64::new(0.0, 2.0);
    let lhs = op_norm(&gamma);
    let rhs = 4.0 * op_norm(&(&q * h * p)) * op_norm(&(&q * pdot * p));
    Ok(CrossTerm {
        gamma,
        lhs,
        rhs,
        bound_holds: lhs <= rhs + 1e-10,
    })
}

/// All generators for the protected sector `sector` of `fam` at time `t`.
#[derive(Debug, Clone)]
pub struct ZenoGenerators {
    /// Kato-Avron Hamiltonian of the protected projector.
    pub h_zeno: CMatrix,
    /// Counterdiabatic / gauge potential of the full family.
    pub cd: CMatrix,
    /// Transport generator K of the full family.
    pub transport: CMatrix,
    pub gamma_dt: CMatrix,
    pub gamma_kappa: CMatrix,
    pub gamma_cross: CMatrix,
}

impl ZenoGenerators {
    pub fn at(h: &CMatrix, fam: &ProjectorFamily, sector: usize, t: f64) -> Result<Self> {
        let ps = fam.eval(t);
        let pdots = fam.derivative(t, DerivativeOrder::First)?;
        let (p, pd) = (&ps[sector], &pdots[sector]);
        let transport = transport_generator(&ps, &pdots)?;
        Ok(Self {
            h_zeno: kato_avron_hamiltonian(h, p, pd)?,
            cd: &transport * I,
            transport,
            gamma_dt: gamma_dt(h, p, pd)?,
            gamma_kappa: gamma_kappa(h, p, pd)?,
            gamma_cross: gamma_cross_and_bound(h, p, pd)?.gamma,
        })
    }
}

/// Projector derivative that never fails: analytic when available, else a
/// central difference whose stencil is shifted inside [0, T] near the ends.
pub(crate) fn derivative_inside(fam: &ProjectorFamily, t: f64) -> Vec<CMatrix> {
    if let Ok(d) = fam.derivative(t, DerivativeOrder::First) {
        return d;
    }
    let h = fam.fd_step();
    let horizon = fam.horizon();
    let (a, b, c0, s) = if t - h < 0.0 {
        (fam.eval(t), fam.eval(t + h), fam.eval(t + 2.0 * h), 1.0)
    } else {
        (fam.eval(t), fam.eval(t - h), fam.eval(t - 2.0 * h), -1.0)
    };
    debug_assert!(t >= 0.0 && t <= horizon);
    a.iter()
        .zip(&b)
        .zip(&c0)
        .map(|((p0, p1), p2)| (p1 * re(4.0) - p2 - p0 * re(3.0)) * re(s / (2.0 * h)))
        .collect()
}

/// t -> Kato-Avron Hamiltonian of sector `sector` of `fam`.
pub fn kato_avron_schedule(
    h: &OperatorSchedule,
    fam: &ProjectorFamily,
    sector: usize,
) -> OperatorSchedule {
    let (h, fam) = (h.clone(), fam.clone());
    OperatorSchedule::new(h.dim(), h.horizon(), true, move |t| {
        let p = fam.sector(sector, t);
        let pd = &derivative_inside(&fam, t)[sector];
        let k = pd * &p - &p * pd;
        hermitian_part(&(&p * h.eval(t) * &p + k * I))
    })
}

/// t -> block-diagonal Zeno Hamiltonian of the complete family.
pub fn multi_sector_schedule(h: &OperatorSchedule, fam: &ProjectorFamily) -> OperatorSchedule {
    let (h, fam) = (h.clone(), fam.clone());
    OperatorSchedule::new(h.dim(), h.horizon(), true, move |t| {
        let ps = fam.eval(t);
        let pdots = derivative_inside(&fam, t);
        let k = ps
            .iter()
            .zip(&pdots)
            .fold(CMatrix::zeros(h.dim(), h.dim()), |acc, (p, pd)| acc + pd * p);
        hermitian_part(&(pinched_hamiltonian(&h.eval(t), &ps) + k * I))
    })
}

/// t -> H(t) + A(t) with A the counterdiabatic term of the spectral family
/// of H.
pub fn counterdiabatic_schedule(h: &OperatorSchedule) -> OperatorSchedule {
    let fam = ProjectorFamily::spectral(h);
    let h2 = h.clone();
    OperatorSchedule::new(h.dim(), h.horizon(), true, move |t| {
        let ps = fam.eval(t);
        let pdots = derivative_inside(&fam, t);
        let a = ps
            .iter()
            .zip(&pdots)
            .fold(CMatrix::zeros(h2.dim(), h2.dim()), |acc, (p, pd)| acc + pd * p)
            * I;
        hermitian_part(&(h2.eval(t) + a))
    })
}

/// Unitary W(t_k) on a grid with W(0) = I and W' = K W.
#[derive(Debug, Clone)]
pub struct Intertwiner {
    grid: TimeGrid,
    frames: Vec<CMatrix>,
}

impl Intertwiner {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn at(&self, k: usize) -> &CMatrix {
        &self.frames[k]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMatrix> {
        self.frames.iter()
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.frames
            .iter()
            .map(|w| op_norm(&(w.adjoint() * w - identity(w.nrows()))))
            .fold(0.0, f64::max)
    }

    /// max_{k,n} ||P_n(t_k) - W(t_k) P_n(0) W(t_k)^dag||
    pub fn transport_defect(&self, fam: &ProjectorFamily) -> f64 {
        let p0 = fam.eval(0.0);
        self.frames
            .iter()
            .enumerate()
            .map(|(k, w)| {
                fam.eval(self.grid.t(k))
                    .iter()
                    .zip(&p0)
                    .map(|(pt, p)| op_norm(&(pt - w * p * w.adjoint())))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Integrate W' = K W by midpoint exponentials,
/// W(t_{k+1}) = exp(K(t_k + dt/2) dt) W(t_k).
pub fn evolve_intertwiner(fam: &ProjectorFamily, grid: &TimeGrid) -> Result<Intertwiner> {
    let d = fam.dim();
    let dt = grid.dt();
    let mut frames = Vec::with_capacity(grid.steps() + 1);
    let mut w = identity(d);
    frames.push(w.clone());
    for k in 0..grid.steps() {
        let tm = grid.midpoint(k);
        let ps = fam.eval(tm);
        let pdots = derivative_inside(fam, tm);
        let gen = transport_generator(&ps, &pdots)?;
        // exp(K dt) = exp(-i (iK) dt), iK Hermitian
        let step = crate::operators::expm_hermitian(&hermitian_part(&(gen * I)), C64::new(0.0, -dt));
        w = step * w;
        let defect = op_norm(&(w.adjoint() * &w - identity(d)));
        if defect > 1e-6 {
            return Err(Error::UnitarityLoss {
                t: grid.t(k + 1),
                defect,
            });
        }
        frames.push(w.clone());
    }
    Ok(Intertwiner {
        grid: *grid,
        frames,
    })
}
