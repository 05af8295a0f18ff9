//! Stroboscopic Zeno protocols: conditioned maps, selective trajectories,
//! the non-selective channel and its ancilla dilation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{derivative_inside, gamma_dt};
use crate::operators::{
    basis_vector, expectation, identity, idempotence_defect, kron, outer, re, unitary_step,
    CMatrix, CVector, OperatorSchedule, TimeGrid,
};
use crate::spectral::ProjectorFamily;
use crate::state::validate_density;

/// Where H(t) is sampled inside each step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Freeze {
    #[default]
    Left,
    Midpoint,
}

impl Freeze {
    fn time(self, grid: &TimeGrid, k: usize) -> f64 {
        match self {
            Self::Left => grid.t(k),
            Self::Midpoint => grid.midpoint(k),
        }
    }
}

/// Omega = P_next exp(-i H dt) P_now.
pub fn strobe_step(h: &CMatrix, p_now: &CMatrix, p_next: &CMatrix, dt: f64) -> Result<CMatrix> {
    for p in [p_now, p_next] {
        let defect = idempotence_defect(p);
        if defect > 1e-8 {
            return Err(Error::NotAProjector { defect });
        }
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParam {
            name: "dt".into(),
            reason: format!("step must be positive, got {dt}"),
        });
    }
    Ok(p_next * unitary_step(h, dt) * p_now)
}

/// Conditioned (post-selected) stroboscopic evolution.
#[derive(Debug, Clone)]
pub struct StrobeResult {
    pub grid: TimeGrid,
    /// Survival probability of each step, length N.
    pub p_surv: Vec<f64>,
    /// Running product of `p_surv`, length N + 1 starting at 1.
    pub cumulative: Vec<f64>,
    /// Renormalized conditioned states at every grid point.
    pub states: Vec<CVector>,
    /// dt^2 <psi|P H Q H P + P P' P' P|psi> at the start of each step.
    pub leak_estimate: Vec<f64>,
}

impl StrobeResult {
    pub fn final_state(&self) -> &CVector {
        self.states.last().expect("grid has at least one point")
    }

    pub fn final_survival(&self) -> f64 {
        *self.cumulative.last().expect("grid has at least one point")
    }

    /// Un-normalized final amplitude sqrt(cumulative) psi(T).
    pub fn final_amplitude(&self) -> CVector {
        self.final_state() * re(self.final_survival().sqrt())
    }

    /// Leak 1 - p_surv per step.
    pub fn leaks(&self) -> Vec<f64> {
        self.p_surv.iter().map(|p| (1.0 - p).max(0.0)).collect()
    }

    pub fn mean_leak(&self) -> f64 {
        let l = self.leaks();
        l.iter().sum::<f64>() / l.len() as f64
    }

    /// 1 - |<target|amplitude>|^2: infidelity including the lost weight.
    pub fn weighted_infidelity(&self, target: &CVector) -> f64 {
        let a = self.final_amplitude();
        1.0 - target.dotc(&a).norm_sqr() / target.norm_squared()
    }
}

fn ensure_inside(p0: &CMatrix, psi0: &CVector) -> Result<()> {
    let q = identity(p0.nrows()) - p0;
    let leak = (&q * psi0).norm() / psi0.norm();
    if leak > 1e-8 {
        return Err(Error::InitialStateOutsideSubspace { leak });
    }
    Ok(())
}

/// Applies Omega(t_k) for sector `sector` of `fam` step by step, starting
/// from a state inside that sector.
pub fn strobe_evolve_conditioned(
    h: &OperatorSchedule,
    fam: &ProjectorFamily,
    sector: usize,
    grid: &TimeGrid,
    psi0: &CVector,
    freeze: Freeze,
) -> Result<StrobeResult> {
    check_dims(h, fam, psi0.len())?;
    let dt = grid.dt();
    let mut p_now = fam.sector(sector, 0.0);
    ensure_inside(&p_now, psi0)?;
    let mut psi = psi0 / re(psi0.norm());
    let n = grid.steps();
    let mut out = StrobeResult {
        grid: *grid,
        p_surv: Vec::with_capacity(n),
        cumulative: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        leak_estimate: Vec::with_capacity(n),
    };
    out.cumulative.push(1.0);
    out.states.push(psi.clone());
    for k in 0..n {
        let t = grid.t(k);
        let pd = &derivative_inside(fam, t)[sector];
        let gamma = gamma_dt(&h.eval(t), &p_now, pd)?;
        out.leak_estimate
            .push(0.5 * dt * dt * expectation(&gamma, &psi).re);
        let p_next = fam.sector(sector, grid.t(k + 1));
        let u = unitary_step(&h.eval(freeze.time(grid, k)), dt);
        let next = &p_next * (u * (&p_now * &psi));
        let surv = next.norm_squared();
        let cum = out.cumulative[k] * surv;
        if !(cum >= 1e-300) {
            return Err(Error::ZeroSurvival { step: k + 1 });
        }
        psi = next / re(surv.sqrt());
        out.p_surv.push(surv);
        out.cumulative.push(cum);
        out.states.push(psi.clone());
        p_now = p_next;
    }
    Ok(out)
}

/// One selective run measuring the full PVM after every step.
#[derive(Debug, Clone)]
pub struct SelectiveRun {
    /// Observed sector at t_1 .. t_N.
    pub outcomes: Vec<usize>,
    /// Born probabilities of every sector at each measurement.
    pub probabilities: Vec<Vec<f64>>,
    pub final_state: CVector,
}

pub fn strobe_selective<R: Rng + ?Sized>(
    h: &OperatorSchedule,
    fam: &ProjectorFamily,
    grid: &TimeGrid,
    psi0: &CVector,
    freeze: Freeze,
    rng: &mut R,
) -> Result<SelectiveRun> {
    check_dims(h, fam, psi0.len())?;
    let dt = grid.dt();
    let mut psi = psi0 / re(psi0.norm());
    let mut outcomes = Vec::with_capacity(grid.steps());
    let mut probabilities = Vec::with_capacity(grid.steps());
    for k in 0..grid.steps() {
        psi = unitary_step(&h.eval(freeze.time(grid, k)), dt) * psi;
        let ps = fam.eval(grid.t(k + 1));
        let branches: Vec<CVector> = ps.iter().map(|p| p * &psi).collect();
        let probs: Vec<f64> = branches.iter().map(|b| b.norm_squared()).collect();
        let total: f64 = probs.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = probs.len() - 1;
        for (n, &p) in probs.iter().enumerate() {
            if u < p {
                pick = n;
                break;
            }
            u -= p;
        }
        psi = &branches[pick] / re(probs[pick].sqrt());
        outcomes.push(pick);
        probabilities.push(probs);
    }
    Ok(SelectiveRun {
        outcomes,
        probabilities,
        final_state: psi,
    })
}

/// Non-selective channel evolution.
#[derive(Debug, Clone)]
pub struct ChannelEvolution {
    pub final_state: CMatrix,
    /// Tr rho(t_k) at every grid point.
    pub traces: Vec<f64>,
}

/// rho <- sum_n P_n(t_{k+1}) U P_n(t_k) rho P_n(t_k) U^dag P_n(t_{k+1}).
/// The trace is never renormalized.
pub fn strobe_evolve_channel(
    h: &OperatorSchedule,
    fam: &ProjectorFamily,
    grid: &TimeGrid,
    rho0: &CMatrix,
    freeze: Freeze,
) -> Result<ChannelEvolution> {
    validate_density(rho0, None)?;
    check_dims(h, fam, rho0.nrows())?;
    let dt = grid.dt();
    let mut rho = rho0.clone();
    let mut traces = Vec::with_capacity(grid.steps() + 1);
    traces.push(rho.trace().re);
    let mut now = fam.eval(0.0);
    for k in 0..grid.steps() {
        let u = unitary_step(&h.eval(freeze.time(grid, k)), dt);
        let next = fam.eval(grid.t(k + 1));
        let d = rho.nrows();
        let mut acc = CMatrix::zeros(d, d);
        for (pn, pm) in now.iter().zip(&next) {
            let omega = pm * &u * pn;
            acc += &omega * &rho * omega.adjoint();
        }
        rho = acc;
        traces.push(rho.trace().re);
        now = next;
    }
    Ok(ChannelEvolution {
        final_state: rho,
        traces,
    })
}

/// Cyclic shift on C^m with W_n |0> = |n>.
fn probe_shift(m: usize, n: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |i, j| if i == (j + n) % m { re(1.0) } else { re(0.0) })
}

/// Couples the system to an m-level probe with U = sum_n P_n (x) W_n,
/// acts on rho (x) |0><0| and traces out the probe.
pub fn dilation_channel_step(ps: &[CMatrix], rho: &CMatrix) -> Result<CMatrix> {
    validate_density(rho, None)?;
    dilation_map(ps, rho)
}

/// Same map without the density check; linear in `rho`.
pub fn dilation_map(ps: &[CMatrix], rho: &CMatrix) -> Result<CMatrix> {
    let d = rho.nrows();
    let m = ps.len();
    if m == 0 {
        return Err(Error::FamilyInvalid("empty family".into()));
    }
    if let Some(p) = ps.iter().find(|p| p.nrows() != d) {
        return Err(Error::DimMismatch {
            expected: d,
            found: p.nrows(),
        });
    }
    let u = ps
        .iter()
        .enumerate()
        .fold(CMatrix::zeros(d * m, d * m), |acc, (n, p)| {
            acc + kron(p, &probe_shift(m, n))
        });
    let zero = basis_vector(m, 0);
    let joint = kron(rho, &outer(&zero, &zero));
    let out = &u * joint * u.adjoint();
    Ok(partial_trace_probe(&out, d, m))
}

/// Tr_probe of an operator on C^d (x) C^m.
pub fn partial_trace_probe(a: &CMatrix, d: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| (0..m).map(|a_| a[(i * m + a_, j * m + a_)]).sum())
}

fn check_dims(h: &OperatorSchedule, fam: &ProjectorFamily, d: usize) -> Result<()> {
    if h.dim() != fam.dim() {
        return Err(Error::DimMismatch {
            expected: h.dim(),
            found: fam.dim(),
        });
    }
    if d != h.dim() {
        return Err(Error::DimMismatch {
            expected: h.dim(),
            found: d,
        });
    }
    Ok(())
}
