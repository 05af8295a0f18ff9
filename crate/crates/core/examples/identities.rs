//! Projector and leakage identities over random smooth families, plus the
//! static and moving Schulman comparisons.

use zeno_sta::cap::schulman_compare;
use zeno_sta::harness::identity_suite;
use zeno_sta::operators::{basis_projector, model_hamiltonian, sigma_x, ModelSpec, OperatorSchedule};
use zeno_sta::spectral::ProjectorFamily;

fn main() -> zeno_sta::Result<()> {
    let r = identity_suite(200, 2, 8, 1)?;
    let mut out = Vec::new();
    r.table()?.write_csv(&mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    println!("all within tolerance: {}", r.passed());

    let h = OperatorSchedule::constant(sigma_x(), 1.0);
    let fam = ProjectorFamily::constant(vec![basis_projector(2, 0), basis_projector(2, 1)], 1.0)?;
    let s = schulman_compare(&h, &fam, 0, 0.5, 0.01)?;
    println!("static: |G_dt - G_kappa| = {:.1e}", s.difference);
    println!("  G_dt = {}", s.gamma_dt);

    let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0))?;
    let s = schulman_compare(&h, &ProjectorFamily::spectral(&h), 0, 0.3, 0.01)?;
    println!("moving: |G_dt - G_kappa| = {:.1e}, cross term / bound = {:.3}", s.difference, s.bound_ratio);
    Ok(())
}
