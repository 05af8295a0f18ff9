//! Frequent projective measurements drag the rotating qubit's ground state
//! along. Halving dt roughly quarters the per-step leak.
//!
//! cargo run --example strobe

use zeno_sta::harness::protocols::{sector_state, zeno_target};
use zeno_sta::operators::{model_hamiltonian, ModelSpec, TimeGrid};
use zeno_sta::oracle::OracleConfig;
use zeno_sta::spectral::ProjectorFamily;
use zeno_sta::strobe::{strobe_evolve_conditioned, Freeze};

fn main() -> zeno_sta::Result<()> {
    let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0))?;
    let fam = ProjectorFamily::spectral(&h);
    let psi0 = sector_state(&fam, 0, 0.0);
    let target = zeno_target(&h, &fam, 0, &TimeGrid::new(1.0, 200)?, &OracleConfig::default(), &psi0)?
        .pop()
        .unwrap();

    println!("{:>8} {:>12} {:>12} {:>12}", "dt", "survival", "mean leak", "infidelity");
    for steps in [10, 20, 40, 80, 160] {
        let grid = TimeGrid::new(1.0, steps)?;
        let r = strobe_evolve_conditioned(&h, &fam, 0, &grid, &psi0, Freeze::Left)?;
        println!(
            "{:>8.5} {:>12.6} {:>12.3e} {:>12.3e}",
            grid.dt(),
            r.final_survival(),
            r.mean_leak(),
            r.weighted_infidelity(&target)
        );
    }
    Ok(())
}
