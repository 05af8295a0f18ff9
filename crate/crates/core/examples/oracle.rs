//! The brute-force reference. On coarse grids the midpoint product fails its
//! own refinement check; the fourth-order Magnus option passes.

use zeno_sta::generators::kato_avron_schedule;
use zeno_sta::operators::{model_hamiltonian, op_norm, ModelSpec, TimeGrid};
use zeno_sta::oracle::{reference_unitary, OracleConfig};
use zeno_sta::spectral::ProjectorFamily;

fn main() -> zeno_sta::Result<()> {
    let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0))?;
    let hz = kato_avron_schedule(&h, &ProjectorFamily::spectral(&h), 0);
    let fine = reference_unitary(&hz, &TimeGrid::new(1.0, 400)?, &OracleConfig::default())?;

    for steps in [20, 100] {
        let grid = TimeGrid::new(1.0, steps)?;
        for order in [2, 4] {
            let cfg = OracleConfig {
                order,
                ..OracleConfig::default()
            };
            match reference_unitary(&hz, &grid, &cfg) {
                Ok(u) => println!("steps {steps:>3} order {order}: |U - U_fine| = {:.1e}", op_norm(&(u - &fine))),
                Err(e) => println!("steps {steps:>3} order {order}: {e}"),
            }
        }
    }
    Ok(())
}
