//! A complex absorbing potential on the excited sector: the absorbed norm
//! falls off as 1/kappa while the survivor tracks the transported ground
//! state.

use zeno_sta::cap::{cap_evolve, CapSpec};
use zeno_sta::harness::protocols::{sector_state, zeno_target};
use zeno_sta::operators::{model_hamiltonian, ModelSpec, TimeGrid};
use zeno_sta::oracle::OracleConfig;
use zeno_sta::spectral::ProjectorFamily;

fn main() -> zeno_sta::Result<()> {
    let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0))?;
    let fam = ProjectorFamily::spectral(&h);
    let psi0 = sector_state(&fam, 0, 0.0);
    let target = zeno_target(&h, &fam, 0, &TimeGrid::new(1.0, 200)?, &OracleConfig::default(), &psi0)?
        .pop()
        .unwrap();
    let grid = TimeGrid::new(1.0, 2000)?;

    println!("{:>8} {:>12} {:>14} {:>14}", "kappa", "final norm", "leak fraction", "infidelity");
    for kappa in [10.0, 30.0, 100.0, 300.0, 1000.0] {
        let ev = cap_evolve(&h, &CapSpec::two_sector(fam.clone(), 0, kappa)?, &grid, &psi0)?;
        println!(
            "{kappa:>8} {:>12.6} {:>14.4e} {:>14.4e}",
            ev.norms.last().unwrap(),
            ev.final_leak_fraction(),
            ev.weighted_infidelity(&target, &fam.sector(0, 1.0))
        );
    }
    Ok(())
}
