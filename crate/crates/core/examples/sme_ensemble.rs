//! Averaging conditioned trajectories recovers the Lindblad evolution.
//! Static sigma_z monitoring of |+> dephases at 2 kappa.

use std::f64::consts::FRAC_1_SQRT_2;

use zeno_sta::metrics::trace_distance;
use zeno_sta::operators::{basis_projector, outer, re, CMatrix, CVector, OperatorSchedule, TimeGrid};
use zeno_sta::sme::{lindblad_evolve, sme_ensemble, MonitoredObservable, SmeScheme};
use zeno_sta::spectral::ProjectorFamily;

fn main() -> zeno_sta::Result<()> {
    let (kappa, horizon, m) = (5.0, 0.2, 500);
    let h = OperatorSchedule::constant(CMatrix::zeros(2, 2), horizon);
    let fam = ProjectorFamily::constant(vec![basis_projector(2, 0), basis_projector(2, 1)], horizon)?;
    let obs = MonitoredObservable::with_eigenvalues(fam, vec![1.0, -1.0], kappa)?;
    let grid = TimeGrid::new(horizon, 400)?;
    let plus = CVector::from_vec(vec![re(FRAC_1_SQRT_2); 2]);
    let rho0 = outer(&plus, &plus);
    let checkpoints = [80, 160, 240, 320, 400];

    let ens = sme_ensemble(&h, &obs, &grid, &rho0, 11, m, &checkpoints, SmeScheme::Kraus)?;
    let lind = lindblad_evolve(&h, &obs, &grid, &rho0)?;
    println!("M = {m}, bound 3/sqrt(M) = {:.4}", 3.0 / (m as f64).sqrt());
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "|rho01| avg", "exact", "trace dist");
    for (&k, mean) in checkpoints.iter().zip(&ens.mean) {
        let t = grid.t(k);
        println!(
            "{t:>6.3} {:>12.6} {:>12.6} {:>12.2e}",
            mean[(0, 1)].norm(),
            0.5 * (-obs.dephasing_rate(0, 1) * t).exp(),
            trace_distance(mean, &lind[k])
        );
    }
    Ok(())
}
