//! Sector-resolved absorption on a three-level system. Equal strengths only
//! shrink the norm; distinct strengths freeze the populations in place as
//! kappa grows.

use zeno_sta::cap::{multi_sector_separation_check, CapSpec};
use zeno_sta::harness::protocols::sector_state;
use zeno_sta::operators::{model_hamiltonian, re, CVector, ModelSpec, TimeGrid};
use zeno_sta::spectral::ProjectorFamily;

fn main() -> zeno_sta::Result<()> {
    let h = model_hamiltonian(&ModelSpec::three_level(1.0, 1.0))?;
    let fam = ProjectorFamily::spectral(&h);

    let grid = TimeGrid::new(1.0, 200)?;
    let psi = CVector::from_vec(vec![re(0.6), re(0.0), re(0.8)]);
    let equal = CapSpec::multi_sector(fam.clone(), vec![0.5; 3], 4.0)?.without_shift();
    let r = multi_sector_separation_check(&h, &equal, &grid, &psi)?;
    let last = r.populations.last().unwrap();
    println!("equal strengths: total weight {:.6} (e^-4 = {:.6})", last.iter().sum::<f64>(), (-4.0f64).exp());
    println!("  normalized populations {:?}", r.normalized.last().unwrap());

    let grid = TimeGrid::new(1.0, 1000)?;
    let psi0 = sector_state(&fam, 0, 0.0);
    for kappa in [10.0, 100.0, 1000.0] {
        let spec = CapSpec::multi_sector(fam.clone(), vec![0.0, 1.0, 2.0], kappa)?;
        let r = multi_sector_separation_check(&h, &spec, &grid, &psi0)?;
        println!("kappa {kappa:>6}: transfer out of sector {} = {:.4e}", r.start_sector, r.transfer);
    }
    Ok(())
}
