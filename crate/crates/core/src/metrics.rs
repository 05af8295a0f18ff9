//! State functionals and the pinching channel.

use crate::error::{Error, Result};
use crate::operators::{eigh, psd_sqrt, trace_norm, CMatrix};
use crate::state::validate_density;

const ENTROPY_CLIP: f64 = 1e-14;

/// Output of a pinching map with before/after diagnostics.
#[derive(Debug, Clone)]
pub struct ChannelResult {
    pub output: CMatrix,
    pub purity_before: f64,
    pub purity_after: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    /// Tr(P_n rho) per sector.
    pub sector_weights: Vec<f64>,
}

/// rho -> sum_n P_n rho P_n.
pub fn pinch(rho: &CMatrix, ps: &[CMatrix]) -> Result<ChannelResult> {
    validate_density(rho, None)?;
    if ps.iter().any(|p| p.nrows() != rho.nrows()) {
        return Err(Error::DimMismatch {
            expected: rho.nrows(),
            found: ps.iter().map(|p| p.nrows()).find(|&n| n != rho.nrows()).unwrap_or(0),
        });
    }
    let output = pinch_map(rho, ps);
    Ok(ChannelResult {
        purity_before: purity(rho),
        purity_after: purity(&output),
        entropy_before: von_neumann_entropy(rho),
        entropy_after: von_neumann_entropy(&output),
        sector_weights: ps.iter().map(|p| (p * rho).trace().re).collect(),
        output,
    })
}

/// Same map without the density check; linear in `rho`.
pub fn pinch_map(rho: &CMatrix, ps: &[CMatrix]) -> CMatrix {
    let d = rho.nrows();
    ps.iter()
        .fold(CMatrix::zeros(d, d), |acc, p| acc + p * rho * p)
}

/// Tr rho^2.
pub fn purity(rho: &CMatrix) -> f64 {
    // Tr(rho rho) = sum |rho_ij|^2 for Hermitian rho
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// -sum p ln p over the spectrum; eigenvalues below 1e-14 count as zero.
pub fn von_neumann_entropy(rho: &CMatrix) -> f64 {
    let (vals, _) = eigh(rho);
    vals.iter()
        .filter(|&&p| p > ENTROPY_CLIP)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let s = psd_sqrt(rho);
    let inner = &s * sigma * &s;
    let (vals, _) = eigh(&inner);
    let root: f64 = vals.iter().map(|&x| x.max(0.0).sqrt()).sum();
    root * root
}

/// (1/2) ||rho - sigma||_1.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    0.5 * trace_norm(&(rho - sigma))
}

/// Checked versions for external callers.
pub fn fidelity_checked(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    validate_density(rho, None)?;
    validate_density(sigma, None)?;
    Ok(fidelity(rho, sigma))
}

pub fn trace_distance_checked(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    validate_density(rho, None)?;
    validate_density(sigma, None)?;
    Ok(trace_distance(rho, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{basis_projector, basis_vector, identity, op_norm, outer, re, CVector};
    use crate::testing::{random_density, random_pvm};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus() -> CMatrix {
        let v = CVector::from_vec(vec![re(1.0), re(1.0)]) / re(2f64.sqrt());
        outer(&v, &v)
    }

    fn z_pvm() -> Vec<CMatrix> {
        vec![basis_projector(2, 0), basis_projector(2, 1)]
    }

    #[test]
    fn dephasing_plus_state() {
        let r = pinch(&plus(), &z_pvm()).unwrap();
        assert!(op_norm(&(r.output - identity(2) * re(0.5))) < 1e-15);
        assert!((r.purity_before - 1.0).abs() < 1e-12);
        assert!((r.purity_after - 0.5).abs() < 1e-12);
        assert!((r.entropy_after - 2f64.ln()).abs() < 1e-12);
        assert_eq!(r.sector_weights.len(), 2);
    }

    #[test]
    fn block_diagonal_is_fixed() {
        let rho = crate::operators::diag(&[0.3, 0.7]);
        let r = pinch(&rho, &z_pvm()).unwrap();
        assert!(op_norm(&(r.output - &rho)) < 1e-15);
        assert!((r.purity_after - r.purity_before).abs() < 1e-15);
    }

    #[test]
    fn pure_and_maximally_mixed_values() {
        let v = basis_vector(3, 1);
        let p = outer(&v, &v);
        assert!((purity(&p) - 1.0).abs() < 1e-15);
        assert!(von_neumann_entropy(&p).abs() < 1e-15);
        let m = identity(2) * re(0.5);
        assert!((purity(&m) - 0.5).abs() < 1e-15);
        assert!((von_neumann_entropy(&m) - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn fidelity_and_distance_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 2..6 {
            let rho = random_density(d, &mut rng);
            assert!((fidelity(&rho, &rho) - 1.0).abs() < 1e-10);
            assert!(trace_distance(&rho, &rho) < 1e-15);
        }
        // orthogonal pure states
        let a = basis_projector(2, 0);
        let b = basis_projector(2, 1);
        assert!(fidelity(&a, &b).abs() < 1e-15);
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-15);
        // pure-state fidelity is the squared overlap
        assert!((fidelity(&a, &plus()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn checked_versions_reject_garbage() {
        assert!(fidelity_checked(&crate::operators::sigma_x(), &plus()).is_err());
        assert!(trace_distance_checked(&plus(), &crate::operators::sigma_y()).is_err());
        assert!(pinch(&crate::operators::sigma_z(), &z_pvm()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pinching_is_monotone(seed in any::<u64>(), d in 2usize..7, m in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = m.min(d);
            let rho = random_density(d, &mut rng);
            let ps = random_pvm(d, m, &mut rng);
            let r = pinch(&rho, &ps).unwrap();
            prop_assert!(r.purity_after <= r.purity_before + 1e-10);
            prop_assert!(r.entropy_after >= r.entropy_before - 1e-10);
            prop_assert!((r.output.trace().re - rho.trace().re).abs() <= 1e-12);
            let twice = pinch_map(&r.output, &ps);
            prop_assert!(op_norm(&(twice - &r.output)) <= 1e-12);
        }

        #[test]
        fn fuchs_van_de_graaf(seed in any::<u64>(), d in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_density(d, &mut rng);
            let b = random_density(d, &mut rng);
            let f = fidelity(&a, &b);
            let t = trace_distance(&a, &b);
            // F is the squared Uhlmann fidelity: 1 - sqrt F <= T <= sqrt(1 - F)
            prop_assert!(1.0 - f.sqrt() <= t + 1e-10);
            prop_assert!(t <= (1.0 - f).max(0.0).sqrt() + 1e-10);
        }
    }

    #[test]
    fn fuchs_van_de_graaf_lower_bound_uses_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(2835940568645722970);
        let a = random_density(3, &mut rng);
        let b = random_density(3, &mut rng);
        let (f, t) = (fidelity(&a, &b), trace_distance(&a, &b));
        assert!(1.0 - f.sqrt() <= t + 1e-10 && t <= (1.0 - f).sqrt() + 1e-10);
    }
}
