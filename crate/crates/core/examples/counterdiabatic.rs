//! Adding the gauge-potential term to H keeps a Landau-Zener sweep in its
//! instantaneous ground state. Without it the sweep is diabatic.

use zeno_sta::generators::counterdiabatic_schedule;
use zeno_sta::harness::protocols::sector_state;
use zeno_sta::operators::{model_hamiltonian, ModelSpec, TimeGrid};
use zeno_sta::oracle::{reference_states, OracleConfig};
use zeno_sta::spectral::ProjectorFamily;

fn main() -> zeno_sta::Result<()> {
    let h = model_hamiltonian(&ModelSpec::landau_zener(2.0, 1.0, 10.0))?;
    let fam = ProjectorFamily::spectral(&h);
    let grid = TimeGrid::new(10.0, 2000)?;
    let psi0 = sector_state(&fam, 0, 0.0);
    let cfg = OracleConfig::default();

    let bare = reference_states(&h, &grid, &cfg, &psi0)?;
    let driven = reference_states(&counterdiabatic_schedule(&h), &grid, &cfg, &psi0)?;
    println!("{:>6} {:>12} {:>12}", "t", "H only", "H + A");
    for k in (0..=grid.steps()).step_by(200) {
        let p = fam.sector(0, grid.t(k));
        println!(
            "{:>6.1} {:>12.6} {:>12.9}",
            grid.t(k),
            (&p * &bare[k]).norm_squared(),
            (&p * &driven[k]).norm_squared()
        );
    }
    Ok(())
}
