//! One runner per protocol. Each returns a summary record plus per-time
//! (or per-check) rows.

use rand::Rng;
use rayon::prelude::*;

use super::config::{FamilyChoice, Protocol, ScenarioConfig, StrobeMode};
use super::table::{Record, Table};
use crate::cap::{cap_evolve, multi_sector_separation_check, CapMode, CapSpec};
use crate::error::{Error, Result};
use crate::generators::{counterdiabatic_schedule, gamma_cross_and_bound, gamma_dt, gamma_kappa, kato_avron_schedule};
use crate::metrics::{purity, trace_distance, von_neumann_entropy};
use crate::operators::{
    basis_projector, eigh, model_hamiltonian, op_norm, outer, re, CMatrix, CVector, OperatorSchedule, TimeGrid,
};
use crate::oracle::{reference_states, OracleConfig};
use crate::rng::stream;
use crate::sme::{lindblad_evolve, sme_ensemble, MonitoredObservable};
use crate::spectral::{DerivativeOrder, ProjectorFamily};
use crate::strobe::{strobe_evolve_channel, strobe_evolve_conditioned, strobe_selective};
use crate::testing::{random_hermitian, random_smooth_family};

/// Output of one scenario.
#[derive(Debug, Clone)]
pub struct Report {
    pub protocol: Protocol,
    pub summary: Record,
    pub rows: Table,
}

/// Steps of the coarse grid the oracle uses when only U(T) is needed.
const TARGET_STEPS: usize = 200;

struct Setup {
    h: OperatorSchedule,
    fam: ProjectorFamily,
    grid: TimeGrid,
    sector: usize,
    psi0: CVector,
}

fn setup(cfg: &ScenarioConfig) -> Result<Setup> {
    let h = model_hamiltonian(cfg.model()?).map_err(|e| match e {
        Error::MissingParam(k) => Error::ConfigInvalid(format!("model.params.{k}")),
        other => other,
    })?;
    let grid = cfg.grid.build(h.horizon())?;
    let fam = match cfg.family {
        FamilyChoice::Spectral => ProjectorFamily::spectral(&h),
        FamilyChoice::Computational => {
            ProjectorFamily::constant((0..h.dim()).map(|n| basis_projector(h.dim(), n)).collect(), h.horizon())?
        }
    };
    if cfg.sector >= fam.sector_count() {
        return Err(Error::ConfigInvalid("sector".into()));
    }
    let vecs = match cfg.family {
        FamilyChoice::Spectral => eigh(&h.eval(0.0)).1,
        FamilyChoice::Computational => CMatrix::identity(h.dim(), h.dim()),
    };
    let psi0 = match &cfg.initial {
        None => sector_state(&fam, cfg.sector, 0.0),
        Some(a) => {
            let v = a
                .iter()
                .enumerate()
                .fold(CVector::zeros(h.dim()), |acc, (n, &c)| acc + vecs.column(n) * re(c));
            &v / re(v.norm())
        }
    };
    Ok(Setup {
        h,
        fam,
        grid,
        sector: cfg.sector,
        psi0,
    })
}

/// Top eigenvector of P_n(t).
pub fn sector_state(fam: &ProjectorFamily, n: usize, t: f64) -> CVector {
    let p = fam.sector(n, t);
    let (_, vecs) = eigh(&p);
    vecs.column(p.nrows() - 1).into_owned()
}

/// psi0 transported by the Kato-Avron Hamiltonian of sector `sector`,
/// sampled on `grid`.
pub fn zeno_target(
    h: &OperatorSchedule,
    fam: &ProjectorFamily,
    sector: usize,
    grid: &TimeGrid,
    oracle: &OracleConfig,
    psi0: &CVector,
) -> Result<Vec<CVector>> {
    reference_states(&kato_avron_schedule(h, fam, sector), grid, oracle, psi0)
}

/// |<a|b>|^2 / (|a|^2 |b|^2)
fn overlap(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm_sqr() / (a.norm_squared() * b.norm_squared())
}

fn final_target(s: &Setup, oracle: &OracleConfig) -> Result<CVector> {
    let coarse = TimeGrid::new(s.h.horizon(), TARGET_STEPS)?;
    Ok(zeno_target(&s.h, &s.fam, s.sector, &coarse, oracle, &s.psi0)?
        .pop()
        .expect("non-empty"))
}

pub fn run_protocol(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let protocol = cfg.protocol()?;
    let (summary, rows) = match protocol {
        Protocol::Strobe => match cfg.strobe.mode {
            StrobeMode::Conditioned => strobe_conditioned(cfg)?,
            StrobeMode::Channel => strobe_channel(cfg)?,
            StrobeMode::Selective => strobe_selective_run(cfg)?,
        },
        Protocol::Sme => sme(cfg)?,
        Protocol::Cap => cap(cfg)?,
        Protocol::Cd => cd(cfg)?,
        Protocol::Identities => {
            let r = identity_suite(
                cfg.identities.families,
                cfg.identities.min_dim,
                cfg.identities.max_dim,
                cfg.seed,
            )?;
            (r.summary(), r.table()?)
        }
    };
    Ok(Report {
        protocol,
        summary,
        rows,
    })
}

fn strobe_conditioned(cfg: &ScenarioConfig) -> Result<(Record, Table)> {
    let s = setup(cfg)?;
    let run = strobe_evolve_conditioned(&s.h, &s.fam, s.sector, &s.grid, &s.psi0, cfg.strobe.freeze)?;
    let target = zeno_target(&s.h, &s.fam, s.sector, &s.grid, &cfg.oracle, &s.psi0)?;
    let dt = s.grid.dt();
    let mut rows = Table::new(&["t", "p_surv", "cum_surv", "fidelity_to_target", "leak_rate"]);
    for k in 0..=s.grid.steps() {
        let p = if k == 0 { 1.0 } else { run.p_surv[k - 1] };
        rows.push(vec![
            s.grid.t(k).into(),
            p.into(),
            run.cumulative[k].into(),
            overlap(&target[k], &run.states[k]).into(),
            ((1.0 - p).max(0.0) / dt).into(),
        ])?;
    }
    let last = target.last().expect("non-empty");
    let summary = Record::new()
        .with("dt", dt)
        .with("steps", s.grid.steps())
        .with("final_survival", run.final_survival())
        .with("mean_leak", run.mean_leak())
        .with(
            "mean_leak_estimate",
            run.leak_estimate.iter().sum::<f64>() / run.leak_estimate.len() as f64,
        )
        .with("weighted_infidelity", run.weighted_infidelity(last))
        .with("fidelity_to_target", overlap(last, run.final_state()));
    Ok((summary, rows))
}

fn strobe_channel(cfg: &ScenarioConfig) -> Result<(Record, Table)> {
    let s = setup(cfg)?;
    let rho0 = outer(&s.psi0, &s.psi0);
    let ev = strobe_evolve_channel(&s.h, &s.fam, &s.grid, &rho0, cfg.strobe.freeze)?;
    let ps0 = s.fam.eval(0.0);
    let ps = s.fam.eval(s.h.horizon());
    let rho = &ev.final_state;
    let mut rows = Table::new(&["sector", "initial_weight", "final_population", "deviation"]);
    let mut worst = 0.0f64;
    for (n, (p0, p)) in ps0.iter().zip(&ps).enumerate() {
        let w0 = (p0 * &rho0).trace().re;
        let w = (p * rho).trace().re;
        worst = worst.max((w - w0).abs());
        rows.push(vec![n.into(), w0.into(), w.into(), (w - w0).into()])?;
    }
    let mut coherence = 0.0f64;
    for (n, pn) in ps.iter().enumerate() {
        for pm in ps.iter().skip(n + 1) {
            coherence = coherence.max(op_norm(&(pn * rho * pm)));
        }
    }
    let summary = Record::new()
        .with("dt", s.grid.dt())
        .with("steps", s.grid.steps())
        .with("trace_final", rho.trace().re)
        .with("max_population_deviation", worst)
        .with("max_coherence", coherence)
        .with("purity_initial", purity(&rho0))
        .with("purity_final", purity(rho))
        .with("entropy_initial", von_neumann_entropy(&rho0))
        .with("entropy_final", von_neumann_entropy(rho));
    Ok((summary, rows))
}

fn strobe_selective_run(cfg: &ScenarioConfig) -> Result<(Record, Table)> {
    let s = setup(cfg)?;
    let mut rng = stream(cfg.seed, 0);
    let run = strobe_selective(&s.h, &s.fam, &s.grid, &s.psi0, cfg.strobe.freeze, &mut rng)?;
    let mut rows = Table::new(&["step", "t", "outcome", "probability"]);
    let mut switches = 0usize;
    for (k, (&o, probs)) in run.outcomes.iter().zip(&run.probabilities).enumerate() {
        if k > 0 && run.outcomes[k - 1] != o {
            switches += 1;
        }
        let total: f64 = probs.iter().sum();
        rows.push(vec![(k + 1).into(), s.grid.t(k + 1).into(), o.into(), (probs[o] / total).into()])?;
    }
    let summary = Record::new()
        .with("dt", s.grid.dt())
        .with("steps", s.grid.steps())
        .with("final_outcome", *run.outcomes.last().expect("at least one step"))
        .with("switches", switches);
    Ok((summary, rows))
}

fn sme(cfg: &ScenarioConfig) -> Result<(Record, Table)> {
    let s = setup(cfg)?;
    let p = &cfg.sme;
    let kappa = p.kappa.ok_or_else(|| Error::ConfigInvalid("kappa".into()))?;
    let obs = match &p.eigenvalues {
        Some(x) => MonitoredObservable::with_eigenvalues(s.fam.clone(), x.clone(), kappa),
        None => MonitoredObservable::new(s.fam.clone(), kappa),
    }
    .map_err(|e| match e {
        Error::InvalidParam { .. } => Error::ConfigInvalid("sme.eigenvalues".into()),
        other => other,
    })?;
    let n = s.grid.steps();
    let c = p.checkpoints.min(n);
    let checkpoints: Vec<usize> = (1..=c).map(|j| (j * n + c / 2) / c).collect();
    let rho0 = outer(&s.psi0, &s.psi0);
    let ens = sme_ensemble(&s.h, &obs, &s.grid, &rho0, cfg.seed, p.trajectories, &checkpoints, p.scheme)?;
    let lind = if p.lindblad {
        Some(lindblad_evolve(&s.h, &obs, &s.grid, &rho0)?)
    } else {
        None
    };
    let mut cols = vec!["t", "target_population", "mean_purity"];
    if lind.is_some() {
        cols.extend(["lindblad_population", "trace_distance"]);
    }
    let mut rows = Table::new(&cols);
    let mut max_td = 0.0f64;
    for (&k, mean) in checkpoints.iter().zip(&ens.mean) {
        let t = s.grid.t(k);
        let pk = s.fam.sector(s.sector, t);
        let mut row = vec![t.into(), (&pk * mean).trace().re.into(), purity(mean).into()];
        if let Some(l) = &lind {
            let td = trace_distance(mean, &l[k]);
            max_td = max_td.max(td);
            row.extend([(&pk * &l[k]).trace().re.into(), td.into()]);
        }
        rows.push(row)?;
    }
    let mean_t = ens.mean.last().expect("at least one checkpoint");
    let pop = (&s.fam.sector(s.sector, s.h.horizon()) * mean_t).trace().re;
    let target = final_target(&s, &cfg.oracle)?;
    let mut summary = Record::new()
        .with("kappa", kappa)
        .with("trajectories", p.trajectories)
        .with("dt", s.grid.dt())
        .with("final_target_population", pop)
        .with("target_loss", 1.0 - pop)
        .with("fidelity_to_target", target.dotc(&(mean_t * &target)).re / target.norm_squared());
    if lind.is_some() {
        summary.push("max_trace_distance", max_td);
        summary.push("trace_distance_bound", 3.0 / (p.trajectories as f64).sqrt());
    }
    Ok((summary, rows))
}

fn cap(cfg: &ScenarioConfig) -> Result<(Record, Table)> {
    let s = setup(cfg)?;
    let kappa = cfg.cap.kappa.ok_or_else(|| Error::ConfigInvalid("kappa".into()))?;
    let mode = match &cfg.cap.lambdas {
        Some(l) => CapMode::MultiSector { lambdas: l.clone() },
        None => CapMode::TwoSector { protect: s.sector },
    };
    let mut spec = CapSpec::new(s.fam.clone(), mode, kappa).map_err(|e| match e {
        Error::InvalidParam { name, .. } if name == "lambda" => Error::ConfigInvalid("cap.lambdas".into()),
        other => other,
    })?;
    if !cfg.cap.shift {
        spec = spec.without_shift();
    }
    if let CapMode::MultiSector { .. } = spec.mode() {
        let r = multi_sector_separation_check(&s.h, &spec, &s.grid, &s.psi0)?;
        let m = s.fam.sector_count();
        let mut cols = vec!["t".to_string(), "norm".to_string()];
        cols.extend((0..m).map(|n| format!("population_{n}")));
        let mut rows = Table::new(&cols);
        for (k, pops) in r.populations.iter().enumerate() {
            let mut row = vec![s.grid.t(k).into(), pops.iter().sum::<f64>().sqrt().into()];
            row.extend(pops.iter().map(|&p| p.into()));
            rows.push(row)?;
        }
        let summary = Record::new()
            .with("kappa", kappa)
            .with("shift", r.shift)
            .with("start_sector", r.start_sector)
            .with("transfer", r.transfer);
        return Ok((summary, rows));
    }
    let ev = cap_evolve(&s.h, &spec, &s.grid, &s.psi0)?;
    let mut rows = Table::new(&["t", "norm", "leak_norm", "leak_fraction", "protected_population"]);
    for k in 0..=s.grid.steps() {
        let t = s.grid.t(k);
        let pop = (&s.fam.sector(s.sector, t) * &ev.states[k]).norm_squared();
        rows.push(vec![
            t.into(),
            ev.norms[k].into(),
            ev.leak_norms[k].into(),
            (ev.leak_norms[k] / ev.norms[k]).into(),
            pop.into(),
        ])?;
    }
    let target = final_target(&s, &cfg.oracle)?;
    let psi = ev.final_state();
    let p_t = s.fam.sector(s.sector, s.h.horizon());
    let summary = Record::new()
        .with("kappa", kappa)
        .with("dt", s.grid.dt())
        .with("final_norm", *ev.norms.last().expect("non-empty"))
        .with("leak_fraction", ev.final_leak_fraction())
        .with("weighted_infidelity", ev.weighted_infidelity(&target, &p_t))
        .with("fidelity_to_target", overlap(&target, psi));
    Ok((summary, rows))
}

fn cd(cfg: &ScenarioConfig) -> Result<(Record, Table)> {
    let s = setup(cfg)?;
    let states = reference_states(&counterdiabatic_schedule(&s.h), &s.grid, &cfg.oracle, &s.psi0)?;
    let mut rows = Table::new(&["t", "fidelity"]);
    let mut min_f = f64::INFINITY;
    for (k, psi) in states.iter().enumerate() {
        let t = s.grid.t(k);
        let f = (&s.fam.sector(s.sector, t) * psi).norm_squared();
        min_f = min_f.min(f);
        rows.push(vec![t.into(), f.into()])?;
    }
    let final_f = rows.rows().last().and_then(|r| r[1].as_f64()).unwrap_or(f64::NAN);
    let summary = Record::new()
        .with("dt", s.grid.dt())
        .with("steps", s.grid.steps())
        .with("min_fidelity", min_f)
        .with("final_fidelity", final_f)
        .with("infidelity", 1.0 - min_f);
    Ok((summary, rows))
}

/// Worst-case values of the projector and leakage identities over random
/// smooth families.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub families: usize,
    /// max ||P P' P||
    pub ppp: f64,
    /// max ||P P'' P + 2 P P' P' P||
    pub second_order: f64,
    /// max ||Gamma_kappa - Gamma_dt - Gamma_cross|| / ||Gamma_kappa||
    pub decomposition: f64,
    /// Families with ||Gamma_cross|| > 4 ||QHP|| ||QP'P||.
    pub bound_violations: usize,
    /// max ||Gamma_cross|| / (4 ||QHP|| ||QP'P||)
    pub bound_ratio: f64,
}

pub const PPP_TOL: f64 = 1e-10;
pub const SECOND_ORDER_TOL: f64 = 1e-10;
pub const DECOMPOSITION_TOL: f64 = 1e-12;

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.ppp <= PPP_TOL
            && self.second_order <= SECOND_ORDER_TOL
            && self.decomposition <= DECOMPOSITION_TOL
            && self.bound_violations == 0
    }

    pub fn table(&self) -> Result<Table> {
        let mut t = Table::new(&["check", "worst", "tolerance", "violations", "pass"]);
        let rows: [(&str, f64, f64); 3] = [
            ("P P' P", self.ppp, PPP_TOL),
            ("P P'' P + 2 P P' P' P", self.second_order, SECOND_ORDER_TOL),
            ("gamma decomposition", self.decomposition, DECOMPOSITION_TOL),
        ];
        for (name, worst, tol) in rows {
            t.push(vec![
                name.into(),
                worst.into(),
                tol.into(),
                usize::from(worst > tol).into(),
                (worst <= tol).into(),
            ])?;
        }
        t.push(vec![
            "cross bound".into(),
            self.bound_ratio.into(),
            1.0.into(),
            self.bound_violations.into(),
            (self.bound_violations == 0).into(),
        ])?;
        Ok(t)
    }

    pub fn summary(&self) -> Record {
        Record::new()
            .with("families", self.families)
            .with("max_ppp", self.ppp)
            .with("max_second_order", self.second_order)
            .with("max_decomposition", self.decomposition)
            .with("bound_violations", self.bound_violations)
            .with("all_pass", self.passed())
    }
}

struct FamilyCheck {
    ppp: f64,
    second: f64,
    decomposition: f64,
    ratio: f64,
    violated: bool,
}

fn check_family(seed: u64, j: u64, min_dim: usize, max_dim: usize) -> Result<FamilyCheck> {
    let mut rng = stream(seed, j);
    let d = rng.random_range(min_dim..=max_dim);
    let rank = rng.random_range(1..d);
    let fam = random_smooth_family(d, rank, &mut rng);
    let h = random_hermitian(d, &mut rng);
    let t = rng.random_range(0.0..1.0);
    let p = fam.sector(0, t);
    let pd = fam.derivative(t, DerivativeOrder::First)?.swap_remove(0);
    let pdd = fam.derivative(t, DerivativeOrder::Second)?.swap_remove(0);
    let gd = gamma_dt(&h, &p, &pd)?;
    let gk = gamma_kappa(&h, &p, &pd)?;
    let cross = gamma_cross_and_bound(&h, &p, &pd)?;
    let scale = op_norm(&gk).max(f64::MIN_POSITIVE);
    Ok(FamilyCheck {
        ppp: op_norm(&(&p * &pd * &p)),
        second: op_norm(&(&p * &pdd * &p + &p * &pd * &pd * &p * re(2.0))),
        decomposition: op_norm(&(gk - gd - &cross.gamma)) / scale,
        ratio: if cross.rhs > 0.0 { cross.lhs / cross.rhs } else { 0.0 },
        violated: !cross.bound_holds,
    })
}

/// Checks the identities on `families` random families with d drawn from
/// `min_dim..=max_dim`, H random Hermitian and t uniform in [0, 1).
pub fn identity_suite(families: usize, min_dim: usize, max_dim: usize, seed: u64) -> Result<IdentityReport> {
    if min_dim < 2 || max_dim < min_dim {
        return Err(Error::InvalidParam {
            name: "dim".into(),
            reason: format!("need 2 <= min_dim <= max_dim, got {min_dim}..={max_dim}"),
        });
    }
    let checks: Vec<FamilyCheck> = (0..families as u64)
        .into_par_iter()
        .map(|j| check_family(seed, j, min_dim, max_dim))
        .collect::<Result<_>>()?;
    let max = |f: fn(&FamilyCheck) -> f64| checks.iter().map(f).fold(0.0, f64::max);
    Ok(IdentityReport {
        families,
        ppp: max(|c| c.ppp),
        second_order: max(|c| c.second),
        decomposition: max(|c| c.decomposition),
        bound_ratio: max(|c| c.ratio),
        bound_violations: checks.iter().filter(|c| c.violated).count(),
    })
}
