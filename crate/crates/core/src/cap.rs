//! Complex absorbing potentials: H_nh(t) = H(t) - i kappa V(t) with
//! V = Q(t) or V = sum_n lambda_n P_n(t).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{
    derivative_inside, gamma_absorber, gamma_cross_and_bound, gamma_dt, gamma_kappa, Intertwiner,
};
use crate::operators::{
    c, eigh, expm_general, identity, op_norm, re, CMatrix, CVector, OperatorSchedule, TimeGrid,
};
use crate::sme::comoving_hamiltonian;
use crate::spectral::ProjectorFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CapMode {
    /// Absorb everything outside sector `protect`: V = I - P_protect.
    TwoSector { protect: usize },
    /// V = sum_n lambda_n P_n.
    MultiSector { lambdas: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct CapSpec {
    kappa: f64,
    mode: CapMode,
    fam: ProjectorFamily,
    shift_to_zero: bool,
}

impl CapSpec {
    pub fn two_sector(fam: ProjectorFamily, protect: usize, kappa: f64) -> Result<Self> {
        Self::new(fam, CapMode::TwoSector { protect }, kappa)
    }

    pub fn multi_sector(fam: ProjectorFamily, lambdas: Vec<f64>, kappa: f64) -> Result<Self> {
        Self::new(fam, CapMode::MultiSector { lambdas }, kappa)
    }

    pub fn new(fam: ProjectorFamily, mode: CapMode, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParam {
                name: "kappa".into(),
                reason: format!("must be finite and non-negative, got {kappa}"),
            });
        }
        match &mode {
            CapMode::TwoSector { protect } if *protect >= fam.sector_count() => {
                return Err(Error::InvalidParam {
                    name: "protect".into(),
                    reason: format!("sector {protect} of {}", fam.sector_count()),
                })
            }
            CapMode::MultiSector { lambdas } if lambdas.len() != fam.sector_count() => {
                return Err(Error::InvalidParam {
                    name: "lambda".into(),
                    reason: format!("{} values for {} sectors", lambdas.len(), fam.sector_count()),
                })
            }
            CapMode::MultiSector { lambdas } if lambdas.iter().any(|l| !l.is_finite()) => {
                return Err(Error::NonFiniteInput)
            }
            _ => {}
        }
        Ok(Self {
            kappa,
            mode,
            fam,
            shift_to_zero: true,
        })
    }

    /// Keep the raw lambda offsets instead of shifting lambda_min to zero.
    pub fn without_shift(mut self) -> Self {
        self.shift_to_zero = false;
        self
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let mut s = Self::new(self.fam.clone(), self.mode.clone(), kappa)?;
        s.shift_to_zero = self.shift_to_zero;
        Ok(s)
    }

    pub fn mode(&self) -> &CapMode {
        &self.mode
    }

    pub fn family(&self) -> &ProjectorFamily {
        &self.fam
    }

    /// Amount subtracted from every lambda (zero in two-sector mode).
    pub fn shift(&self) -> f64 {
        match &self.mode {
            CapMode::MultiSector { lambdas } if self.shift_to_zero => {
                lambdas.iter().copied().fold(f64::INFINITY, f64::min)
            }
            _ => 0.0,
        }
    }

    /// Index of the sector that does not decay.
    pub fn protected_sector(&self) -> usize {
        match &self.mode {
            CapMode::TwoSector { protect } => *protect,
            CapMode::MultiSector { lambdas } => lambdas
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0),
        }
    }

    /// The absorbing operator V(t), positive semidefinite after the shift.
    pub fn absorber(&self, t: f64) -> CMatrix {
        let ps = self.fam.eval(t);
        let d = self.fam.dim();
        match &self.mode {
            CapMode::TwoSector { protect } => identity(d) - &ps[*protect],
            CapMode::MultiSector { lambdas } => {
                let s = self.shift();
                ps.iter()
                    .zip(lambdas)
                    .fold(CMatrix::zeros(d, d), |acc, (p, &l)| acc + p * re(l - s))
            }
        }
    }

    pub fn generator(&self, h: &CMatrix, t: f64) -> CMatrix {
        h - self.absorber(t) * c(0.0, self.kappa)
    }
}

#[derive(Debug, Clone)]
pub struct CapEvolution {
    pub grid: TimeGrid,
    pub states: Vec<CVector>,
    pub norms: Vec<f64>,
    /// ||(I - P_protect(t)) psi(t)|| at every grid point.
    pub leak_norms: Vec<f64>,
    pub shift: f64,
}

impl CapEvolution {
    pub fn final_state(&self) -> &CVector {
        self.states.last().expect("grid has at least one point")
    }

    /// ||Q psi|| / ||psi|| at the end of the run.
    pub fn final_leak_fraction(&self) -> f64 {
        self.leak_norms.last().expect("non-empty") / self.norms.last().expect("non-empty")
    }

    /// 1 - |<target|P psi(T)>|^2 with psi(T) not renormalized.
    pub fn weighted_infidelity(&self, target: &CVector, p_final: &CMatrix) -> f64 {
        let a = p_final * self.final_state();
        1.0 - target.dotc(&a).norm_sqr() / target.norm_squared()
    }
}

/// psi(t_{k+1}) = exp(-i H_nh(t_k + dt/2) dt) psi(t_k).
pub fn cap_evolve(h: &OperatorSchedule, cap: &CapSpec, grid: &TimeGrid, psi0: &CVector) -> Result<CapEvolution> {
    if h.dim() != cap.fam.dim() || psi0.len() != h.dim() {
        return Err(Error::DimMismatch {
            expected: h.dim(),
            found: if psi0.len() != h.dim() { psi0.len() } else { cap.fam.dim() },
        });
    }
    let n0 = psi0.norm();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParam {
            name: "psi0".into(),
            reason: format!("initial state must be normalized, norm is {n0}"),
        });
    }
    let dt = grid.dt();
    let protect = cap.protected_sector();
    let leak = |psi: &CVector, t: f64| ((identity(h.dim()) - cap.fam.sector(protect, t)) * psi).norm();
    let mut psi = psi0.clone();
    let mut out = CapEvolution {
        grid: *grid,
        states: Vec::with_capacity(grid.steps() + 1),
        norms: Vec::with_capacity(grid.steps() + 1),
        leak_norms: Vec::with_capacity(grid.steps() + 1),
        shift: cap.shift(),
    };
    out.states.push(psi.clone());
    out.norms.push(psi.norm());
    out.leak_norms.push(leak(&psi, 0.0));
    for k in 0..grid.steps() {
        let tm = grid.midpoint(k);
        let gen = cap.generator(&h.eval(tm), tm);
        psi = expm_general(&gen, c(0.0, -dt)) * psi;
        let norm = psi.norm();
        let t = grid.t(k + 1);
        if !(norm >= 1e-300) {
            return Err(Error::NormUnderflow { t });
        }
        out.leak_norms.push(leak(&psi, t));
        out.norms.push(norm);
        out.states.push(psi.clone());
    }
    Ok(out)
}

/// psi~ = W^dag psi split into P_0 and Q_0 parts.
#[derive(Debug, Clone)]
pub struct ComovingSplit {
    pub p0: CMatrix,
    pub psi_p: Vec<CVector>,
    pub psi_q: Vec<CVector>,
}

impl ComovingSplit {
    pub fn new(evolution: &CapEvolution, w: &Intertwiner, p0: &CMatrix) -> Result<Self> {
        if evolution.states.len() != w.len() {
            return Err(Error::GridMismatch(format!(
                "{} states but intertwiner has {} points",
                evolution.states.len(),
                w.len()
            )));
        }
        let q0 = identity(p0.nrows()) - p0;
        let (mut psi_p, mut psi_q) = (Vec::new(), Vec::new());
        for (psi, wk) in evolution.states.iter().zip(w.iter()) {
            let tilde = wk.adjoint() * psi;
            psi_p.push(p0 * &tilde);
            psi_q.push(&q0 * &tilde);
        }
        Ok(Self {
            p0: p0.clone(),
            psi_p,
            psi_q,
        })
    }

    pub fn norms_p(&self) -> Vec<f64> {
        self.psi_p.iter().map(|v| v.norm()).collect()
    }

    pub fn norms_q(&self) -> Vec<f64> {
        self.psi_q.iter().map(|v| v.norm()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EliminationEstimate {
    pub estimate: CVector,
    /// ||psi_Q - estimate|| / ||psi_Q||
    pub relative_mismatch: f64,
    /// kappa / ||H~|| fell below 10.
    pub weak_absorber: bool,
}

/// psi_Q ~ (1 / (i kappa)) Q_0 H~ P_0 psi_P at grid index `k`.
pub fn adiabatic_elimination_estimate(
    h_tilde: &CMatrix,
    split: &ComovingSplit,
    k: usize,
    kappa: f64,
) -> EliminationEstimate {
    let q0 = identity(split.p0.nrows()) - &split.p0;
    let estimate = (&q0 * h_tilde * &split.p0 * &split.psi_p[k]) * c(0.0, -1.0 / kappa);
    let measured = &split.psi_q[k];
    let relative_mismatch = (measured - &estimate).norm() / measured.norm();
    EliminationEstimate {
        estimate,
        relative_mismatch,
        weak_absorber: kappa < 10.0 * op_norm(h_tilde),
    }
}

/// Adiabatic-elimination mismatch at every grid point after the transient
/// t > 5 / kappa. The CAP must be two-sector.
pub fn elimination_mismatch(
    h: &OperatorSchedule,
    cap: &CapSpec,
    w: &Intertwiner,
    evolution: &CapEvolution,
) -> Result<Vec<(f64, f64)>> {
    let p0 = cap.fam.sector(cap.protected_sector(), 0.0);
    let split = ComovingSplit::new(evolution, w, &p0)?;
    let grid = evolution.grid;
    let mut out = Vec::new();
    for k in 0..=grid.steps() {
        let t = grid.t(k);
        if t <= 5.0 / cap.kappa {
            continue;
        }
        let ht = comoving_hamiltonian(h, &cap.fam, w, k)?;
        out.push((t, adiabatic_elimination_estimate(&ht, &split, k, cap.kappa).relative_mismatch));
    }
    Ok(out)
}

/// Sector populations under a multi-sector CAP.
#[derive(Debug, Clone)]
pub struct SeparationReport {
    /// ||P_n(t_k) psi(t_k)||^2, indexed [k][n].
    pub populations: Vec<Vec<f64>>,
    /// populations normalized by their sum at each step.
    pub normalized: Vec<Vec<f64>>,
    /// 1 - ||P_s(T) psi(T)||^2 for the starting sector s.
    pub transfer: f64,
    pub start_sector: usize,
    pub shift: f64,
}

/// Evolves under H - i kappa Lambda and reports per-sector populations.
pub fn multi_sector_separation_check(
    h: &OperatorSchedule,
    cap: &CapSpec,
    grid: &TimeGrid,
    psi0: &CVector,
) -> Result<SeparationReport> {
    if !matches!(cap.mode, CapMode::MultiSector { .. }) {
        return Err(Error::InvalidParam {
            name: "mode".into(),
            reason: "separation check needs a multi-sector CAP".into(),
        });
    }
    let ev = cap_evolve(h, cap, grid, psi0)?;
    let populations: Vec<Vec<f64>> = ev
        .states
        .iter()
        .enumerate()
        .map(|(k, psi)| {
            cap.fam
                .eval(grid.t(k))
                .iter()
                .map(|p| (p * psi).norm_squared())
                .collect()
        })
        .collect();
    let normalized = populations
        .iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|p| p / s).collect()
        })
        .collect();
    let start_sector = populations[0]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let transfer = 1.0 - populations.last().expect("non-empty")[start_sector];
    Ok(SeparationReport {
        populations,
        normalized,
        transfer,
        start_sector,
        shift: ev.shift,
    })
}

/// Leakage operators for the step / absorber identification kappa = 1/dt.
#[derive(Debug, Clone, Serialize)]
pub struct SchulmanReport {
    pub t: f64,
    pub dt: f64,
    pub kappa: f64,
    /// ||Gamma_dt - Gamma_kappa||
    pub difference: f64,
    /// ||Gamma_cross||
    pub cross: f64,
    /// ||Gamma_cross|| / (4 ||QHP|| ||QP'P||); zero when the bound is zero.
    pub bound_ratio: f64,
    /// Leak rate of the strobed protocol, <Gamma_dt> dt / 2, in the state
    /// of largest Gamma_dt weight.
    pub strobe_rate: f64,
    /// Loss rate of the absorber, <Gamma_absorber> / kappa, same state.
    pub absorber_rate: f64,
    #[serde(skip)]
    pub gamma_dt: CMatrix,
    #[serde(skip)]
    pub gamma_kappa: CMatrix,
}

pub fn schulman_compare(
    h: &OperatorSchedule,
    fam: &ProjectorFamily,
    sector: usize,
    t: f64,
    dt: f64,
) -> Result<SchulmanReport> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParam {
            name: "dt".into(),
            reason: "must be positive".into(),
        });
    }
    let hm = h.eval(t);
    let p = fam.sector(sector, t);
    let pd = derivative_inside(fam, t)[sector].clone();
    let gd = gamma_dt(&hm, &p, &pd)?;
    let gk = gamma_kappa(&hm, &p, &pd)?;
    let ga = gamma_absorber(&hm, &p, &pd)?;
    let cross = gamma_cross_and_bound(&hm, &p, &pd)?;
    let kappa = 1.0 / dt;
    let (_, vecs) = eigh(&gd);
    let top = vecs.column(vecs.ncols() - 1).into_owned();
    let top = if (&p * &top).norm() > 0.5 { top } else { eigh(&p).1.column(p.nrows() - 1).into_owned() };
    Ok(SchulmanReport {
        t,
        dt,
        kappa,
        difference: op_norm(&(&gd - &gk)),
        cross: cross.lhs,
        bound_ratio: if cross.rhs > 0.0 { cross.lhs / cross.rhs } else { 0.0 },
        strobe_rate: 0.5 * dt * top.dotc(&(&gd * &top)).re,
        absorber_rate: top.dotc(&(&ga * &top)).re / kappa,
        gamma_dt: gd,
        gamma_kappa: gk,
    })
}

/// Principal logarithm of a matrix near the identity: square roots by the
/// Denman-Beavers iteration until ||B - I|| < 0.1, then the Mercator series.
fn logm_near_identity(b: &CMatrix) -> Option<CMatrix> {
    let r = b.nrows();
    let id = identity(r);
    let mut y = b.clone();
    let mut squarings = 0u32;
    while op_norm(&(&y - &id)) >= 0.1 {
        if squarings > 40 {
            return None;
        }
        let mut z = id.clone();
        let mut yk = y.clone();
        for _ in 0..50 {
            let yi = yk.clone().try_inverse()?;
            let zi = z.clone().try_inverse()?;
            let yn = (&yk + zi) * re(0.5);
            z = (&z + yi) * re(0.5);
            let done = op_norm(&(&yn - &yk)) < 1e-15 * op_norm(&yn);
            yk = yn;
            if done {
                break;
            }
        }
        y = yk;
        squarings += 1;
    }
    let x = &y - &id;
    let mut term = x.clone();
    let mut sum = x.clone();
    for n in 2..60 {
        term = &term * &x;
        let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
        sum += &term * re(sign / n as f64);
    }
    Some(sum * re(2f64.powi(squarings as i32)))
}

/// Effective generator of the protected block between grid indices `k1`
/// and `k2`: G with P_0 psi~(t2) = exp(-i G (t2 - t1)) P_0 psi~(t1) for
/// every start inside Ran P_0. Returned in an orthonormal basis of Ran P_0.
pub fn effective_block_generator(
    h: &OperatorSchedule,
    cap: &CapSpec,
    grid: &TimeGrid,
    w: &Intertwiner,
    k1: usize,
    k2: usize,
) -> Result<CMatrix> {
    if k2 <= k1 || k2 > grid.steps() || w.len() != grid.steps() + 1 {
        return Err(Error::GridMismatch(format!("window {k1}..{k2}")));
    }
    let sector = cap.protected_sector();
    let p0 = cap.fam.sector(sector, 0.0);
    let (vals, vecs) = eigh(&p0);
    let basis: Vec<CVector> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(i, _)| vecs.column(i).into_owned())
        .collect();
    let r = basis.len();
    let mut c1 = CMatrix::zeros(r, r);
    let mut c2 = CMatrix::zeros(r, r);
    for (j, b) in basis.iter().enumerate() {
        let ev = cap_evolve(h, cap, grid, b)?;
        let at = |k: usize| w.at(k).adjoint() * &ev.states[k];
        let (a1, a2) = (at(k1), at(k2));
        for (i, e) in basis.iter().enumerate() {
            c1[(i, j)] = e.dotc(&a1);
            c2[(i, j)] = e.dotc(&a2);
        }
    }
    let inv = c1
        .try_inverse()
        .ok_or_else(|| Error::NormUnderflow { t: grid.t(k1) })?;
    let b = c2 * inv;
    let log = logm_near_identity(&b).ok_or(Error::NonConvergence { change: f64::NAN })?;
    Ok(log * c(0.0, 1.0 / (grid.t(k2) - grid.t(k1))))
}
