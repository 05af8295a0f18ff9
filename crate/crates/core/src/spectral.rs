//! Instantaneous eigenframes and smooth projector families.
//!
//! Eigenvectors are gauge fixed by discrete parallel transport: between
//! consecutive grid points the columns are matched by maximum overlap and
//! rephased so that every overlap <n(t_k)|n(t_{k+1})> is real and positive.
//! Projector families carry their derivatives either analytically or through
//! central differences with step h = 1e-5 T.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{
    commutator, eigh, expm_hermitian, hermiticity_defect, idempotence_defect, identity, op_norm,
    outer, re, CMatrix, OperatorSchedule, TimeGrid, C64, I,
};

type FamilyFn = Arc<dyn Fn(f64) -> Vec<CMatrix> + Send + Sync>;

pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// Gauge-fixed instantaneous eigenbasis of a Hermitian schedule on a grid.
#[derive(Clone)]
pub struct EigenFrame {
    grid: TimeGrid,
    schedule: OperatorSchedule,
    eigenvalues: Vec<Vec<f64>>,
    vectors: Vec<CMatrix>,
    gap_tol: f64,
}

impl fmt::Debug for EigenFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EigenFrame")
            .field("grid", &self.grid)
            .field("dim", &self.schedule.dim())
            .field("min_gap", &self.min_gap())
            .finish()
    }
}

/// Greedy maximum-overlap matching of the columns of `new` onto the columns
/// of `reference`, followed by rephasing so each matched overlap is real and
/// non-negative. Returns the aligned matrix and the permutation (column j of
/// the result is column `perm[j]` of `new`).
pub fn align_columns(reference: &CMatrix, new: &CMatrix) -> (CMatrix, Vec<usize>) {
    let d = reference.ncols();
    let overlaps = reference.adjoint() * new;
    let mut perm = vec![usize::MAX; d];
    let mut taken = vec![false; d];
    let mut pairs: Vec<(usize, usize, f64)> = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, overlaps[(i, j)].norm()))
        .collect();
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
    for (i, j, _) in pairs {
        if perm[i] == usize::MAX && !taken[j] {
            perm[i] = j;
            taken[j] = true;
        }
    }
    let mut out = CMatrix::zeros(new.nrows(), d);
    for (i, &j) in perm.iter().enumerate() {
        let ov = overlaps[(i, j)];
        let phase = if ov.norm() > 0.0 {
            ov.conj() / ov.norm()
        } else {
            re(1.0)
        };
        out.set_column(i, &(new.column(j) * phase));
    }
    (out, perm)
}

/// Fix the phase of each column so that its largest-magnitude component is
/// real and positive.
pub fn canonical_phases(v: &CMatrix) -> CMatrix {
    let mut out = v.clone();
    for j in 0..v.ncols() {
        let col = v.column(j);
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        let z = col[imax];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            out.set_column(j, &(col * phase));
        }
    }
    out
}

fn min_adjacent_gap(vals: &[f64]) -> f64 {
    vals.windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Diagonalize H on every grid point, continuity-order the levels and fix
/// the gauge by parallel transport.
pub fn instantaneous_frame(h: &OperatorSchedule, grid: &TimeGrid) -> Result<EigenFrame> {
    instantaneous_frame_with_gap(h, grid, DEFAULT_GAP_TOL)
}

pub fn instantaneous_frame_with_gap(
    h: &OperatorSchedule,
    grid: &TimeGrid,
    gap_tol: f64,
) -> Result<EigenFrame> {
    if !h.is_hermitian() {
        return Err(Error::InvalidParam {
            name: "H".into(),
            reason: "eigenframes need a Hermitian-flagged schedule".into(),
        });
    }
    let mut eigenvalues = Vec::with_capacity(grid.steps() + 1);
    let mut vectors: Vec<CMatrix> = Vec::with_capacity(grid.steps() + 1);
    for (k, t) in grid.points().enumerate() {
        let (vals, vecs) = eigh(&h.eval(t));
        let gap = min_adjacent_gap(&vals);
        if gap < gap_tol {
            return Err(Error::GapCollapse { t, gap });
        }
        if k == 0 {
            eigenvalues.push(vals);
            vectors.push(canonical_phases(&vecs));
        } else {
            let (aligned, perm) = align_columns(&vectors[k - 1], &vecs);
            eigenvalues.push(perm.iter().map(|&j| vals[j]).collect());
            vectors.push(aligned);
        }
    }
    Ok(EigenFrame {
        grid: *grid,
        schedule: h.clone(),
        eigenvalues,
        vectors,
        gap_tol,
    })
}

impl EigenFrame {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn schedule(&self) -> &OperatorSchedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.schedule.dim()
    }

    pub fn eigenvalues(&self, k: usize) -> &[f64] {
        &self.eigenvalues[k]
    }

    /// Eigenvectors at grid point k, one per column.
    pub fn vectors(&self, k: usize) -> &CMatrix {
        &self.vectors[k]
    }

    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|v| {
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                min_adjacent_gap(&s)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Rank-1 projectors |n(t_k)><n(t_k)| in frame order.
    pub fn projectors_at(&self, k: usize) -> Vec<CMatrix> {
        let v = &self.vectors[k];
        (0..v.ncols())
            .map(|n| outer(&v.column(n).into_owned(), &v.column(n).into_owned()))
            .collect()
    }

    /// Eigenpairs at an arbitrary time, ordered and phased to match the
    /// frame at the nearest grid point.
    pub fn eigenpairs_at(&self, t: f64) -> Result<(Vec<f64>, CMatrix)> {
        let (vals, vecs) = eigh(&self.schedule.eval(t));
        let gap = min_adjacent_gap(&vals);
        if gap < self.gap_tol {
            return Err(Error::GapCollapse { t, gap });
        }
        let k = self.grid.nearest_index(t);
        let (aligned, perm) = align_columns(&self.vectors[k], &vecs);
        Ok((perm.iter().map(|&j| vals[j]).collect(), aligned))
    }

    /// Eigenvectors and their time derivatives at `t`, by a central
    /// difference of parallel-transported eigenvectors (second-order
    /// one-sided stencil at the ends of [0, T]).
    pub fn eigenvector_derivatives(&self, t: f64) -> Result<(CMatrix, CMatrix)> {
        let h = 1e-5 * self.grid.horizon();
        let (_, v0) = self.eigenpairs_at(t)?;
        let at = |s: f64| -> Result<CMatrix> {
            let (vals, vecs) = eigh(&self.schedule.eval(s));
            let gap = min_adjacent_gap(&vals);
            if gap < self.gap_tol {
                return Err(Error::GapCollapse { t: s, gap });
            }
            Ok(align_columns(&v0, &vecs).0)
        };
        let horizon = self.grid.horizon();
        let vdot = if t - h < 0.0 {
            (at(t + h)? * re(4.0) - at(t + 2.0 * h)? - &v0 * re(3.0)) / re(2.0 * h)
        } else if t + h > horizon {
            (&v0 * re(3.0) - at(t - h)? * re(4.0) + at(t - 2.0 * h)?) / re(2.0 * h)
        } else {
            (at(t + h)? - at(t - h)?) / re(2.0 * h)
        };
        Ok((v0, vdot))
    }
}

/// Invariant defects of a set of projectors at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyDefects {
    pub idempotence: f64,
    pub hermiticity: f64,
    pub orthogonality: f64,
    pub completeness: f64,
    pub rank: f64,
}

impl FamilyDefects {
    pub fn of(projectors: &[CMatrix], ranks: &[usize]) -> Self {
        let d = projectors.first().map_or(0, |p| p.nrows());
        let mut out = FamilyDefects {
            idempotence: 0.0,
            hermiticity: 0.0,
            orthogonality: 0.0,
            completeness: 0.0,
            rank: 0.0,
        };
        let mut sum = CMatrix::zeros(d, d);
        for (n, p) in projectors.iter().enumerate() {
            out.idempotence = out.idempotence.max(idempotence_defect(p));
            out.hermiticity = out.hermiticity.max(hermiticity_defect(p));
            if let Some(&r) = ranks.get(n) {
                out.rank = out.rank.max((p.trace().re - r as f64).abs());
            }
            for q in projectors.iter().skip(n + 1) {
                out.orthogonality = out.orthogonality.max(op_norm(&(p * q)));
            }
            sum += p;
        }
        out.completeness = op_norm(&(sum - identity(d)));
        out
    }

    pub fn within_tolerances(&self) -> bool {
        self.idempotence <= 1e-10
            && self.hermiticity <= 1e-12
            && self.orthogonality <= 1e-10
            && self.completeness <= 1e-10
            && self.rank <= 1e-6
    }
}

/// A complete orthogonal set of projectors {P_n(t)} with constant ranks.
#[derive(Clone)]
pub struct ProjectorFamily {
    dim: usize,
    horizon: f64,
    ranks: Vec<usize>,
    eval: FamilyFn,
    first: Option<FamilyFn>,
    second: Option<FamilyFn>,
    fd_step: f64,
}

impl fmt::Debug for ProjectorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProjectorFamily")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("ranks", &self.ranks)
            .field("analytic_first", &self.first.is_some())
            .field("analytic_second", &self.second.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

impl ProjectorFamily {
    pub fn from_fn(
        dim: usize,
        horizon: f64,
        ranks: Vec<usize>,
        eval: impl Fn(f64) -> Vec<CMatrix> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            horizon,
            ranks,
            eval: Arc::new(eval),
            first: None,
            second: None,
            fd_step: 1e-5 * horizon,
        }
    }

    pub fn with_first_derivative(
        mut self,
        f: impl Fn(f64) -> Vec<CMatrix> + Send + Sync + 'static,
    ) -> Self {
        self.first = Some(Arc::new(f));
        self
    }

    pub fn with_second_derivative(
        mut self,
        f: impl Fn(f64) -> Vec<CMatrix> + Send + Sync + 'static,
    ) -> Self {
        self.second = Some(Arc::new(f));
        self
    }

    /// Drop analytic derivatives so that finite differences are used.
    pub fn without_analytic_derivatives(mut self) -> Self {
        self.first = None;
        self.second = None;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    /// Time-independent family.
    pub fn constant(projectors: Vec<CMatrix>, horizon: f64) -> Result<Self> {
        let dim = projectors
            .first()
            .map(|p| p.nrows())
            .ok_or_else(|| Error::FamilyInvalid("empty family".into()))?;
        let ranks: Vec<usize> = projectors
            .iter()
            .map(|p| p.trace().re.round() as usize)
            .collect();
        let defects = FamilyDefects::of(&projectors, &ranks);
        if !defects.within_tolerances() {
            return Err(Error::FamilyInvalid(format!("{defects:?}")));
        }
        let m = projectors.len();
        let zeros = vec![CMatrix::zeros(dim, dim); m];
        let z2 = zeros.clone();
        Ok(Self::from_fn(dim, horizon, ranks, move |_| projectors.clone())
            .with_first_derivative(move |_| zeros.clone())
            .with_second_derivative(move |_| z2.clone()))
    }

    /// Rigidly rotated family P_n(t) = e^{tG} P_n e^{-tG} for anti-Hermitian
    /// G, with exact derivatives P' = [G, P] and P'' = [G, [G, P]].
    pub fn rotated(base: Vec<CMatrix>, generator: CMatrix, horizon: f64) -> Result<Self> {
        let dim = base
            .first()
            .map(|p| p.nrows())
            .ok_or_else(|| Error::FamilyInvalid("empty family".into()))?;
        if op_norm(&(&generator + generator.adjoint())) > 1e-12 * op_norm(&generator).max(1.0) {
            return Err(Error::FamilyInvalid("rotation generator must be anti-Hermitian".into()));
        }
        let ranks = base.iter().map(|p| p.trace().re.round() as usize).collect();
        // e^{tG} = exp(-i t (iG)) with iG Hermitian
        let herm = &generator * I;
        let rot = {
            let herm = herm.clone();
            let base = base.clone();
            move |t: f64| -> Vec<CMatrix> {
                let u = expm_hermitian(&herm, C64::new(0.0, -t));
                base.iter().map(|p| &u * p * u.adjoint()).collect()
            }
        };
        let rot1 = rot.clone();
        let rot2 = rot.clone();
        let g1 = generator.clone();
        let g2 = generator;
        Ok(Self::from_fn(dim, horizon, ranks, rot)
            .with_first_derivative(move |t| {
                rot1(t).iter().map(|p| &g1 * p - p * &g1).collect()
            })
            .with_second_derivative(move |t| {
                rot2(t)
                    .iter()
                    .map(|p| {
                        let c1 = &g2 * p - p * &g2;
                        &g2 * &c1 - &c1 * &g2
                    })
                    .collect()
            }))
    }

    /// Rank-1 spectral projectors of a nondegenerate Hermitian schedule in
    /// ascending energy order. When the schedule has an analytic derivative,
    /// P_n' comes from first-order perturbation theory,
    /// P_n' = sum_{m != n} (P_m H' P_n + P_n H' P_m) / (E_n - E_m),
    /// and P_n'' from a central difference of P_n'.
    pub fn spectral(h: &OperatorSchedule) -> Self {
        let dim = h.dim();
        let horizon = h.horizon();
        let ranks = vec![1; dim];
        let sched = h.clone();
        let eval = move |t: f64| -> Vec<CMatrix> {
            let (_, v) = eigh(&sched.eval(t));
            (0..dim)
                .map(|n| {
                    let col = v.column(n).into_owned();
                    outer(&col, &col)
                })
                .collect()
        };
        let mut fam = Self::from_fn(dim, horizon, ranks, eval);
        if h.has_analytic_derivative() {
            let sched = h.clone();
            let first = move |t: f64| -> Vec<CMatrix> {
                let (vals, v) = eigh(&sched.eval(t));
                let hdot = sched.derivative(t);
                let ps: Vec<CMatrix> = (0..dim)
                    .map(|n| {
                        let col = v.column(n).into_owned();
                        outer(&col, &col)
                    })
                    .collect();
                (0..dim)
                    .map(|n| {
                        let mut acc = CMatrix::zeros(dim, dim);
                        for m in (0..dim).filter(|&m| m != n) {
                            let term = &ps[m] * &hdot * &ps[n];
                            acc += (&term + term.adjoint()) / re(vals[n] - vals[m]);
                        }
                        acc
                    })
                    .collect()
            };
            let first = Arc::new(first);
            let f2 = first.clone();
            let h_fd = 1e-5 * horizon;
            fam = fam
                .with_first_derivative(move |t| first(t))
                .with_second_derivative(move |t| {
                    let (lo, hi) = if t - h_fd < 0.0 {
                        (t, t + h_fd)
                    } else if t + h_fd > horizon {
                        (t - h_fd, t)
                    } else {
                        (t - h_fd, t + h_fd)
                    };
                    let (a, b) = (f2(hi), f2(lo));
                    a.iter().zip(&b).map(|(x, y)| (x - y) / re(hi - lo)).collect()
                });
        }
        fam
    }

    /// Merge sectors: each group of sector indices becomes one projector.
    pub fn coarse_grain(&self, groups: &[Vec<usize>]) -> Result<Self> {
        let m = self.sector_count();
        let mut seen = vec![false; m];
        for g in groups {
            for &n in g {
                if n >= m || seen[n] {
                    return Err(Error::FamilyInvalid(format!(
                        "sector groups must partition 0..{m}"
                    )));
                }
                seen[n] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::FamilyInvalid(format!("sector groups must partition 0..{m}")));
        }
        let groups: Arc<Vec<Vec<usize>>> = Arc::new(groups.to_vec());
        let dim = self.dim;
        let merge = {
            let groups = groups.clone();
            move |ps: Vec<CMatrix>| -> Vec<CMatrix> {
                groups
                    .iter()
                    .map(|g| g.iter().fold(CMatrix::zeros(dim, dim), |acc, &n| acc + &ps[n]))
                    .collect()
            }
        };
        let ranks = groups
            .iter()
            .map(|g| g.iter().map(|&n| self.ranks[n]).sum())
            .collect();
        let e = self.eval.clone();
        let merge0 = merge.clone();
        let mut out = Self::from_fn(dim, self.horizon, ranks, move |t| merge0(e(t)));
        out.fd_step = self.fd_step;
        if let Some(f) = self.first.clone() {
            let mg = merge.clone();
            out.first = Some(Arc::new(move |t| mg(f(t))));
        }
        if let Some(f) = self.second.clone() {
            let mg = merge;
            out.second = Some(Arc::new(move |t| mg(f(t))));
        }
        Ok(out)
    }

    /// Two-sector family {P, I - P} where P is the sum of the listed sectors.
    pub fn protect(&self, sectors: &[usize]) -> Result<Self> {
        let rest: Vec<usize> = (0..self.sector_count())
            .filter(|n| !sectors.contains(n))
            .collect();
        if rest.is_empty() {
            return Err(Error::FamilyInvalid("protected subspace is the whole space".into()));
        }
        self.coarse_grain(&[sectors.to_vec(), rest])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn sector_count(&self) -> usize {
        self.ranks.len()
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_analytic_first(&self) -> bool {
        self.first.is_some()
    }

    pub fn has_analytic_second(&self) -> bool {
        self.second.is_some()
    }

    pub fn eval(&self, t: f64) -> Vec<CMatrix> {
        (self.eval)(t)
    }

    pub fn sector(&self, n: usize, t: f64) -> CMatrix {
        self.eval(t).swap_remove(n)
    }

    pub fn defects(&self, t: f64) -> FamilyDefects {
        FamilyDefects::of(&self.eval(t), &self.ranks)
    }

    pub fn validate_at(&self, t: f64) -> Result<()> {
        let d = self.defects(t);
        if d.within_tolerances() {
            Ok(())
        } else {
            Err(Error::FamilyInvalid(format!("at t = {t}: {d:?}")))
        }
    }

    pub fn validate_on(&self, grid: &TimeGrid) -> Result<()> {
        grid.points().try_for_each(|t| self.validate_at(t))
    }

    /// First or second time derivative of every sector at `t`.
    pub fn derivative(&self, t: f64, order: DerivativeOrder) -> Result<Vec<CMatrix>> {
        projector_derivative(self, t, order)
    }
}

/// P_n' or P_n'' at `t`. Analytic callbacks take precedence; otherwise
/// central differences with step `fam.fd_step()` are used, which requires
/// the stencil to stay inside [0, T].
pub fn projector_derivative(
    fam: &ProjectorFamily,
    t: f64,
    order: DerivativeOrder,
) -> Result<Vec<CMatrix>> {
    let analytic = match order {
        DerivativeOrder::First => &fam.first,
        DerivativeOrder::Second => &fam.second,
    };
    if let Some(f) = analytic {
        return Ok(f(t));
    }
    let h = fam.fd_step;
    if t - h < 0.0 || t + h > fam.horizon {
        return Err(Error::BoundaryStencil { t, h });
    }
    let plus = fam.eval(t + h);
    let minus = fam.eval(t - h);
    Ok(match order {
        DerivativeOrder::First => plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| (p - m) / re(2.0 * h))
            .collect(),
        DerivativeOrder::Second => {
            let mid = fam.eval(t);
            plus.iter()
                .zip(&minus)
                .zip(&mid)
                .map(|((p, m), c)| (p - c * re(2.0) + m) / re(h * h))
                .collect()
        }
    })
}

/// Spectral projector family of a validated frame.
pub fn spectral_projectors(frame: &EigenFrame) -> ProjectorFamily {
    ProjectorFamily::spectral(frame.schedule())
}

/// [P', P] for a single projector.
pub fn kato_commutator(p: &CMatrix, pdot: &CMatrix) -> CMatrix {
    commutator(pdot, p).expect("matching dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{
        basis_projector, model_hamiltonian, sigma_x, sigma_z, ModelSpec,
    };
    use crate::testing::{random_hermitian, random_smooth_family};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) {
        let d = op_norm(&(a - b));
        assert!(d <= tol, "deviation {d:e} > {tol:e}");
    }

    #[test]
    fn constant_sigma_z_frame() {
        let h = OperatorSchedule::constant(sigma_z(), 1.0);
        let f = instantaneous_frame(&h, &TimeGrid::new(1.0, 10).unwrap()).unwrap();
        assert_eq!(f.eigenvalues(5), &[-1.0, 1.0]);
        let ps = spectral_projectors(&f).eval(0.3);
        close(&ps[0], &basis_projector(2, 1), 1e-15);
        close(&ps[1], &basis_projector(2, 0), 1e-15);
    }

    #[test]
    fn rotating_qubit_frame_invariants() {
        let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0)).unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let f = instantaneous_frame(&h, &grid).unwrap();
        for k in 0..=grid.steps() {
            let e = f.eigenvalues(k);
            assert!((e[0] + 0.5).abs() < 1e-14 && (e[1] - 0.5).abs() < 1e-14);
            let v = f.vectors(k);
            close(&(v.adjoint() * v), &identity(2), 1e-11);
            let hm = h.eval(grid.t(k));
            for n in 0..2 {
                let col = v.column(n).into_owned();
                let r = (&hm * &col - &col * re(e[n])).norm();
                assert!(r <= 1e-10 * op_norm(&hm));
            }
            if k > 0 {
                let prev = f.vectors(k - 1);
                for n in 0..2 {
                    let ov = prev.column(n).dotc(&v.column(n));
                    assert!(ov.im.abs() < 1e-14 && ov.re > 0.0);
                }
            }
        }
    }

    #[test]
    fn landau_zener_minimal_gap_at_crossing() {
        let h = model_hamiltonian(&ModelSpec::landau_zener(2.0, 1.0, 10.0)).unwrap();
        let grid = TimeGrid::new(10.0, 1000).unwrap();
        let f = instantaneous_frame(&h, &grid).unwrap();
        assert!((f.min_gap() - 1.0).abs() < 1e-12);
        let mid = f.eigenvalues(500);
        assert!((mid[1] - mid[0] - 1.0).abs() < 1e-12);
        // closed-form gap sqrt((v (t - T/2))^2 + Delta^2)
        for k in (0..=1000).step_by(37) {
            let t = grid.t(k);
            let e = f.eigenvalues(k);
            let gap = ((2.0 * (t - 5.0)).powi(2) + 1.0).sqrt();
            assert!((e[1] - e[0] - gap).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_spectrum_is_rejected() {
        let h = OperatorSchedule::constant(identity(2), 1.0);
        assert!(matches!(
            instantaneous_frame(&h, &TimeGrid::new(1.0, 4).unwrap()),
            Err(Error::GapCollapse { .. })
        ));
    }

    #[test]
    fn rotating_qubit_bloch_projectors() {
        let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0)).unwrap();
        let fam = ProjectorFamily::spectral(&h);
        for &t in &[0.0, 0.17, 0.5, 0.93, 1.0] {
            let th = PI / 2.0 * t;
            let nsig = sigma_z() * re(th.cos()) + sigma_x() * re(th.sin());
            let ps = fam.eval(t);
            close(&ps[0], &((identity(2) - &nsig) * re(0.5)), 1e-14);
            close(&ps[1], &((identity(2) + &nsig) * re(0.5)), 1e-14);
        }
    }

    #[test]
    fn random_hermitian_projectors_are_complete_and_gauge_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hm = random_hermitian(5, &mut rng);
        let (_, v) = eigh(&hm);
        let ps: Vec<CMatrix> = (0..5)
            .map(|n| outer(&v.column(n).into_owned(), &v.column(n).into_owned()))
            .collect();
        let sum = ps.iter().fold(CMatrix::zeros(5, 5), |a, p| a + p);
        close(&sum, &identity(5), 1e-11);
        // rephasing columns leaves projectors untouched
        for n in 0..5 {
            let phase = C64::from_polar(1.0, 0.7 * n as f64 + 0.3);
            let col = v.column(n) * phase;
            close(&outer(&col, &col), &ps[n], 1e-12);
        }
    }

    #[test]
    fn constant_family_has_zero_derivative() {
        let fam = ProjectorFamily::constant(
            vec![basis_projector(2, 0), basis_projector(2, 1)],
            1.0,
        )
        .unwrap()
        .without_analytic_derivatives();
        for d in projector_derivative(&fam, 0.5, DerivativeOrder::First).unwrap() {
            assert!(op_norm(&d) <= 1e-9);
        }
    }

    #[test]
    fn boundary_stencil_error() {
        let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0)).unwrap();
        let fam = ProjectorFamily::spectral(&OperatorSchedule::new(2, 1.0, true, move |t| h.eval(t)));
        assert!(matches!(
            projector_derivative(&fam, 0.0, DerivativeOrder::First),
            Err(Error::BoundaryStencil { .. })
        ));
    }

    #[test]
    fn rotating_qubit_fd_projector_identities() {
        let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0)).unwrap();
        let fam = ProjectorFamily::spectral(&h).without_analytic_derivatives();
        for &t in &[0.1, 0.4, 0.77] {
            let p = fam.sector(0, t);
            let pd = &fam.derivative(t, DerivativeOrder::First).unwrap()[0];
            let pdd = &fam.derivative(t, DerivativeOrder::Second).unwrap()[0];
            assert!(op_norm(&(&p * pd * &p)) <= 1e-8);
            let id = &p * pdd * &p + &p * pd * pd * &p * re(2.0);
            assert!(op_norm(&id) <= 1e-5, "{:e}", op_norm(&id));
        }
    }

    #[test]
    fn perturbative_derivative_matches_finite_differences() {
        let h = model_hamiltonian(&ModelSpec::three_level(0.8, 1.5)).unwrap();
        let an = ProjectorFamily::spectral(&h);
        let fd = an.clone().without_analytic_derivatives();
        for &t in &[0.2, 0.75, 1.3] {
            let a = an.derivative(t, DerivativeOrder::First).unwrap();
            let f = fd.derivative(t, DerivativeOrder::First).unwrap();
            for (x, y) in a.iter().zip(&f) {
                close(x, y, 1e-8);
            }
        }
    }

    #[test]
    fn analytic_family_identities_to_machine_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=6 {
            let fam = random_smooth_family(d, 1 + d / 3, &mut rng);
            let t = 0.37;
            let p = fam.sector(0, t);
            let pd = &fam.derivative(t, DerivativeOrder::First).unwrap()[0];
            let pdd = &fam.derivative(t, DerivativeOrder::Second).unwrap()[0];
            assert!(op_norm(&(&p * pd * &p)) <= 1e-11);
            assert!(op_norm(&(&p * pdd * &p + &p * pd * pd * &p * re(2.0))) <= 1e-11);
            assert!(fam.defects(t).within_tolerances());
        }
    }

    #[test]
    fn gauge_ordering_is_identity_for_small_steps() {
        let h = model_hamiltonian(&ModelSpec::landau_zener(2.0, 0.5, 4.0)).unwrap();
        let grid = TimeGrid::new(4.0, 400).unwrap();
        let f = instantaneous_frame(&h, &grid).unwrap();
        for k in 0..=grid.steps() {
            let mut sorted = f.eigenvalues(k).to_vec();
            sorted.sort_by(f64::total_cmp);
            assert_eq!(sorted, f.eigenvalues(k));
        }
    }

    #[test]
    fn coarse_grain_sums_sectors() {
        let h = model_hamiltonian(&ModelSpec::three_level(1.0, 1.0)).unwrap();
        let fam = ProjectorFamily::spectral(&h);
        let two = fam.protect(&[0]).unwrap();
        assert_eq!(two.ranks(), &[1, 2]);
        let ps = two.eval(0.4);
        let full = fam.eval(0.4);
        close(&ps[1], &(&full[1] + &full[2]), 1e-15);
        assert!(fam.coarse_grain(&[vec![0], vec![0, 1, 2]]).is_err());
    }
}
