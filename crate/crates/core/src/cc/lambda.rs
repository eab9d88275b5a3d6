use nalgebra::{DMatrix, DVector};

use super::{CcEquations, ClusterOperator, ExcitationLabel};
use crate::error::{Error, Result};
use crate::fock::{Determinant, OperatorMatrix};

/// De-excitation amplitudes λ_μ solving
/// `⟨Φ|(1+Λ) e^{−T} H e^{T} |Φ_μ⟩ = E λ_μ` for every μ in `manifold`.
pub fn solve_lambda(
    h: &OperatorMatrix,
    t: &ClusterOperator,
    manifold: &[ExcitationLabel],
    tol: f64,
) -> Result<ClusterOperator> {
    let eq = CcEquations::new(h, t.reference, manifold)?;
    for (label, _) in t.iter() {
        if !manifold.contains(label) {
            return Err(Error::Usage(format!("amplitude {label} lies outside the Λ manifold")));
        }
    }
    let n = manifold.len();
    if n == 0 {
        return Ok(eq.to_operator(&[]));
    }
    let amps = eq.amplitudes_of(t);
    let (energy, _) = eq.evaluate(&amps)?;
    let targets = eq.targets().to_vec();
    let ref_pos = eq.reference_position();
    // a[(ν, μ)] = ⟨Φ_ν| H̄ |Φ_μ⟩, b[μ] = ⟨Φ| H̄ |Φ_μ⟩.
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (mu, &(pos, sign)) in targets.iter().enumerate() {
        let mut e = DVector::zeros(h.dim());
        e[pos] = sign;
        let col = eq.transformed(&amps, &e)?;
        b[mu] = col[ref_pos];
        for (nu, &(pos_nu, sign_nu)) in targets.iter().enumerate() {
            a[(nu, mu)] = sign_nu * col[pos_nu];
        }
    }
    let mut m = a.transpose();
    for i in 0..n {
        m[(i, i)] -= energy;
    }
    let rhs = -&b;
    let lu = m.clone().lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("Λ equations are singular".into()))?;
    // One step of iterative refinement.
    let res = &rhs - &m * &x;
    if let Some(dx) = lu.solve(&res) {
        x += dx;
    }
    let err = (&rhs - &m * &x).amax();
    if !err.is_finite() || err > tol.max(1e-12) {
        return Err(Error::LinearSolve(format!(
            "Λ equations solved only to {err:.3e}"
        )));
    }
    Ok(eq.to_operator(x.as_slice()))
}

/// The bra `⟨Φ|(1+Λ)` as a coefficient vector over the basis of `h`.
pub fn left_vector(h: &OperatorMatrix, reference: Determinant, lambda: &ClusterOperator) -> Result<DVector<f64>> {
    let space = h.space();
    let mut v = DVector::zeros(space.len());
    let ref_pos = space
        .position(reference)
        .ok_or_else(|| Error::Usage("reference is not in the basis".into()))?;
    v[ref_pos] = 1.0;
    for (label, value) in lambda.iter() {
        let (sign, det) = label
            .excite(reference)
            .ok_or_else(|| Error::Usage(format!("{label} does not act on the reference")))?;
        let pos = space
            .position(det)
            .ok_or_else(|| Error::Usage(format!("excitation {label} leaves the determinant basis")))?;
        v[pos] += sign * value;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::cc::{manifold, solve_cc, CcOptions};
    use crate::fock::{build_hamiltonian_matrix, enumerate_space, ground_state};
    use crate::hamiltonian::{build_reference_partition, model_pairing, parse_fcidump, to_spin_orbitals};

    #[test]
    fn two_electron_left_state_is_the_fci_bra() {
        let s = to_spin_orbitals(&parse_fcidump(include_str!("../../fixtures/h2_631g.fcidump")).unwrap());
        let p = build_reference_partition(&s, 2, 0).unwrap();
        let space = Arc::new(enumerate_space(s.n_spin, 2, Some(0)).unwrap());
        let h = build_hamiltonian_matrix(&s, &space).unwrap();
        let labels = manifold(p.reference, s.n_spin, 2);
        let cc = solve_cc(&h, p.reference, &labels, &CcOptions::with_fock(p.orbital_energies())).unwrap();
        let lambda = solve_lambda(&h, &cc.t, &labels, 1e-10).unwrap();
        let eq = CcEquations::new(&h, p.reference, &labels).unwrap();
        let amps = eq.amplitudes_of(&cc.t);
        let bra = eq.exp_minus_t_transpose(&amps, &left_vector(&h, p.reference, &lambda).unwrap()).unwrap();
        let ket = eq.wavefunction(&amps).unwrap();
        assert!((bra.dot(&ket) - 1.0).abs() < 1e-12);
        let (_, psi) = ground_state(&h).unwrap();
        let scaled = &psi * (1.0 / psi[space.position(p.reference).unwrap()]);
        assert!((&ket - &scaled).amax() < 1e-8);
        let bra_expected = &psi / psi.dot(&ket);
        assert!((&bra - bra_expected).amax() < 1e-8);
    }

    #[test]
    fn trivial_lambda() {
        let s = model_pairing(3, 1.0, 0.0);
        let p = build_reference_partition(&s, 2, 0).unwrap();
        let space = Arc::new(enumerate_space(6, 2, Some(0)).unwrap());
        let h = build_hamiltonian_matrix(&s, &space).unwrap();
        let labels = manifold(p.reference, 6, 2);
        let t = ClusterOperator::new(p.reference);
        let lambda = solve_lambda(&h, &t, &labels, 1e-12).unwrap();
        assert_eq!(lambda.max_abs(), 0.0);
    }

    #[test]
    fn energy_functional_reproduces_the_energy() {
        let s = to_spin_orbitals(&parse_fcidump(include_str!("../../fixtures/h4_sto3g.fcidump")).unwrap());
        let p = build_reference_partition(&s, 4, 0).unwrap();
        let space = Arc::new(enumerate_space(8, 4, Some(0)).unwrap());
        let h = build_hamiltonian_matrix(&s, &space).unwrap();
        let labels = manifold(p.reference, 8, 2);
        let cc = solve_cc(&h, p.reference, &labels, &CcOptions::with_fock(p.orbital_energies())).unwrap();
        let lambda = solve_lambda(&h, &cc.t, &labels, 1e-10).unwrap();
        let eq = CcEquations::new(&h, p.reference, &labels).unwrap();
        let amps = eq.amplitudes_of(&cc.t);
        let mut phi = DVector::zeros(space.len());
        phi[space.position(p.reference).unwrap()] = 1.0;
        let hbar_phi = eq.transformed(&amps, &phi).unwrap();
        let functional = left_vector(&h, p.reference, &lambda).unwrap().dot(&hbar_phi);
        assert!((functional - cc.energy).abs() < 1e-10);
    }
}
