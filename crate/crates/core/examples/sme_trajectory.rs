//! One homodyne trajectory under strong monitoring of the rotating qubit's
//! energy, printed every 100 steps. Re-running with the same seed and stream
//! reproduces it bit for bit.

use zeno_sta::harness::protocols::sector_state;
use zeno_sta::metrics::purity;
use zeno_sta::operators::{model_hamiltonian, outer, ModelSpec, TimeGrid};
use zeno_sta::sme::{sme_trajectory, MonitoredObservable, SmeOptions};
use zeno_sta::spectral::ProjectorFamily;

fn main() -> zeno_sta::Result<()> {
    let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0))?;
    let fam = ProjectorFamily::spectral(&h);
    let obs = MonitoredObservable::new(fam.clone(), 50.0)?;
    let psi0 = sector_state(&fam, 0, 0.0);
    let grid = TimeGrid::new(1.0, 1000)?;
    let opts = SmeOptions {
        record_every: 100,
        ..SmeOptions::default()
    };
    let rec = sme_trajectory(&h, &obs, &grid, &outer(&psi0, &psi0), 7, 0, &opts)?;

    println!("{:>6} {:>12} {:>10}", "t", "P0 weight", "purity");
    for (k, rho) in rec.indices.iter().zip(&rec.states) {
        let t = grid.t(*k);
        println!("{t:>6.2} {:>12.6} {:>10.6}", (fam.sector(0, t) * rho).trace().re, purity(rho));
    }
    let again = sme_trajectory(&h, &obs, &grid, &outer(&psi0, &psi0), 7, 0, &opts)?;
    println!("reproducible: {}", again.dy == rec.dy);
    Ok(())
}
