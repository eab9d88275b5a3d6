use nalgebra::DMatrix;

use super::{spin_of, SpinIntegralSet};
use crate::error::{Error, Result};
use crate::fock::Determinant;

/// Reference determinant and the normal-ordered split
/// `H = e_ref + F_N + V_N` relative to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePartition {
    pub reference: Determinant,
    /// `⟨Φ|H|Φ⟩`, including the core energy.
    pub e_ref: f64,
    /// Spin-orbital Fock matrix `F_pq = h_pq + Σ_i ⟨pi||qi⟩`.
    pub fock: DMatrix<f64>,
    /// `Σ f_pq {a†_p a_q}` written as a plain operator (scalar `−Σ_i f_ii`).
    pub f_n: SpinIntegralSet,
    /// `¼ Σ ⟨pq||rs⟩ {a†_p a†_q a_s a_r}` written as a plain operator.
    pub v_n: SpinIntegralSet,
}

impl ReferencePartition {
    /// Fock diagonal, indexed by spin orbital.
    pub fn orbital_energies(&self) -> Vec<f64> {
        self.fock.diagonal().iter().copied().collect()
    }

    /// `H_N = F_N + V_N`.
    pub fn h_n(&self) -> SpinIntegralSet {
        self.f_n.add(&self.v_n)
    }
}

/// Lowest-valued `n_alpha` α and `n_beta` β spin orbitals; ties go to the
/// lower index.
fn aufbau(diag: &[f64], n_alpha: usize, n_beta: usize) -> Determinant {
    let mut occ = Vec::new();
    for (spin, count) in [(0, n_alpha), (1, n_beta)] {
        let mut orbitals: Vec<usize> = (0..diag.len()).filter(|&p| spin_of(p) == spin).collect();
        orbitals.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
        occ.extend(orbitals.into_iter().take(count));
    }
    Determinant::from_orbitals(occ)
}

fn fock_matrix(s: &SpinIntegralSet, reference: Determinant) -> DMatrix<f64> {
    let n = s.n_spin;
    let mut f = s.h.clone();
    for i in reference.orbitals() {
        for p in 0..n {
            for q in 0..n {
                f[(p, q)] += s.v(p, i, q, i);
            }
        }
    }
    f
}

/// Pick the reference by a two-pass aufbau (first by `h_pp`, then by the
/// Fock diagonal of that first occupation) and build the normal-ordered
/// pieces of `s`.
pub fn build_reference_partition(s: &SpinIntegralSet, n_electrons: usize, ms2: i32) -> Result<ReferencePartition> {
    let n = s.n_spin;
    if ms2.unsigned_abs() as usize > n_electrons || (n_electrons as i32 + ms2) % 2 != 0 {
        return Err(Error::Usage(format!(
            "ms2 = {ms2} is incompatible with {n_electrons} electrons"
        )));
    }
    let n_alpha = (n_electrons as i32 + ms2) as usize / 2;
    let n_beta = n_electrons - n_alpha;
    if n_alpha > n.div_ceil(2) || n_beta > n / 2 {
        return Err(Error::Usage(format!(
            "{n_alpha} α and {n_beta} β electrons do not fit into {n} spin orbitals"
        )));
    }
    let h_diag: Vec<f64> = s.h.diagonal().iter().copied().collect();
    let first = aufbau(&h_diag, n_alpha, n_beta);
    let f_first = fock_matrix(s, first);
    let f_diag: Vec<f64> = f_first.diagonal().iter().copied().collect();
    let reference = aufbau(&f_diag, n_alpha, n_beta);
    let fock = fock_matrix(s, reference);

    let occ: Vec<usize> = reference.orbitals().collect();
    let mut pair_sum = 0.0;
    for &i in &occ {
        for &j in &occ {
            pair_sum += s.v(i, j, i, j);
        }
    }
    let e_ref = occ.iter().map(|&i| s.h[(i, i)]).sum::<f64>() + 0.5 * pair_sum + s.e_core;
    let f_trace: f64 = occ.iter().map(|&i| fock[(i, i)]).sum();

    let f_n = SpinIntegralSet::new(n, -f_trace, fock.clone());
    let mean_field = &fock - &s.h;
    let mut v_n = SpinIntegralSet::new(n, 0.5 * pair_sum, -mean_field);
    if s.has_two_body() {
        v_n = v_n.with_two_body(s.two_body_dense().to_vec());
    }
    Ok(ReferencePartition {
        reference,
        e_ref,
        fock,
        f_n,
        v_n,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fock::{build_hamiltonian_matrix, build_operator_matrix, enumerate_space};
    use crate::hamiltonian::{parse_fcidump, to_spin_orbitals};

    #[test]
    fn non_interacting_limit() {
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[0.3, 0.3, -0.7, -0.7, 1.0, 1.0]));
        let s = SpinIntegralSet::new(6, 0.1, h.clone());
        let p = build_reference_partition(&s, 2, 0).unwrap();
        assert_eq!(p.fock, h);
        assert_eq!(p.reference, Determinant::from_orbitals([2, 3]));
        assert!((p.e_ref - (-1.4 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn spin_bookkeeping() {
        let s = to_spin_orbitals(&parse_fcidump(include_str!("../../fixtures/h2_sto3g.fcidump")).unwrap());
        let p = build_reference_partition(&s, 2, 0).unwrap();
        assert_eq!(p.reference.n_electrons(), 2);
        assert_eq!(p.reference.ms2(), 0);
        assert_eq!(p.reference, Determinant::from_orbitals([0, 1]));
        let triplet = build_reference_partition(&s, 2, 2).unwrap();
        assert_eq!(triplet.reference, Determinant::from_orbitals([0, 2]));
        assert!(matches!(build_reference_partition(&s, 2, 1), Err(Error::Usage(_))));
        assert!(matches!(build_reference_partition(&s, 6, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let s = SpinIntegralSet::new(4, 0.0, DMatrix::identity(4, 4));
        let p = build_reference_partition(&s, 2, 0).unwrap();
        assert_eq!(p.reference, Determinant::from_orbitals([0, 1]));
    }

    #[test]
    fn reassembled_partition_equals_hamiltonian() {
        for (text, n_e) in [
            (include_str!("../../fixtures/h2_sto3g.fcidump"), 2),
            (include_str!("../../fixtures/h4_sto3g.fcidump"), 4),
        ] {
            let s = to_spin_orbitals(&parse_fcidump(text).unwrap());
            let p = build_reference_partition(&s, n_e, 0).unwrap();
            assert!(crate::fock::max_asymmetry(&p.fock) < 1e-14);
            let space = Arc::new(enumerate_space(s.n_spin, n_e, None).unwrap());
            let h = build_hamiltonian_matrix(&s, &space).unwrap().into_dense();
            let f = build_operator_matrix(&p.f_n, &space).into_dense();
            let v = build_operator_matrix(&p.v_n, &space).into_dense();
            let n = space.len();
            let rebuilt = DMatrix::identity(n, n) * p.e_ref + f + v;
            assert!((&rebuilt - &h).amax() < 1e-12);
            let r = space.position(p.reference).unwrap();
            assert!((h[(r, r)] - p.e_ref).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_fixture_has_diagonal_fock() {
        let s = to_spin_orbitals(&parse_fcidump(include_str!("../../fixtures/h4_sto3g.fcidump")).unwrap());
        let p = build_reference_partition(&s, 4, 0).unwrap();
        let off = DMatrix::from_fn(8, 8, |i, j| if i == j { 0.0 } else { p.fock[(i, j)] });
        assert!(off.amax() < 1e-6);
        // The ordered Fock diagonal puts the four lowest spin orbitals in the reference.
        assert_eq!(p.reference, Determinant::from_orbitals([0, 1, 2, 3]));
    }
}
