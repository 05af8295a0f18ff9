//! Non-selective strobing kills inter-sector coherence but keeps the sector
//! weights. The same pinching map comes out of a probe coupling followed by
//! a partial trace.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zeno_sta::harness::protocols::sector_state;
use zeno_sta::metrics::{pinch, pinch_map, purity, von_neumann_entropy};
use zeno_sta::operators::{model_hamiltonian, op_norm, outer, re, CMatrix, ModelSpec, TimeGrid};
use zeno_sta::oracle::channel_tomography;
use zeno_sta::spectral::ProjectorFamily;
use zeno_sta::strobe::{dilation_map, strobe_evolve_channel, Freeze};
use zeno_sta::testing::{random_density, random_pvm};

fn main() -> zeno_sta::Result<()> {
    let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0))?;
    let fam = ProjectorFamily::spectral(&h);
    let psi0 = sector_state(&fam, 0, 0.0) * re(0.6) + sector_state(&fam, 1, 0.0) * re(0.8);
    let rho0 = outer(&psi0, &psi0);

    for steps in [100, 1000, 10_000] {
        let ev = strobe_evolve_channel(&h, &fam, &TimeGrid::new(1.0, steps)?, &rho0, Freeze::Left)?;
        let rho = &ev.final_state;
        let ps = fam.eval(1.0);
        println!(
            "N={steps:>6}  populations {:.5} {:.5}  coherence {:.2e}  purity {:.4}  entropy {:.4}",
            (&ps[0] * rho).trace().re,
            (&ps[1] * rho).trace().re,
            op_norm(&(&ps[0] * rho * &ps[1])),
            purity(rho),
            von_neumann_entropy(rho),
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ps = random_pvm(4, 3, &mut rng);
    let rho = random_density(4, &mut rng);
    let r = pinch(&rho, &ps)?;
    println!(
        "pinching: purity {:.4} -> {:.4}, entropy {:.4} -> {:.4}",
        r.purity_before, r.purity_after, r.entropy_before, r.entropy_after
    );

    let tomo = channel_tomography(|x: &CMatrix| dilation_map(&ps, x).unwrap(), |x: &CMatrix| pinch_map(x, &ps), 4);
    println!("dilation vs pinching on {} basis elements: {:.1e}", tomo.basis_size, tomo.max_deviation);
    Ok(())
}
