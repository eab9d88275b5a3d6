use std::sync::Arc;

use nalgebra::{Complex, DVector};

use super::{Components, FrequencyGrid, GreensResult};
use crate::error::{Error, Result};
use crate::fock::{apply_string, build_hamiltonian_matrix, enumerate_space, hermitian_eigen, DeterminantSpace, LadderOp};
use crate::hamiltonian::SpinIntegralSet;

/// One eigenstate of a neighbouring sector seen from the N-electron ground
/// state: removal poles sit at `E₀(N) − E_k(N−1)`, addition poles at
/// `E_k(N+1) − E₀(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pole {
    pub omega: f64,
    pub removal: bool,
    /// Residue for each requested pair, in request order.
    pub residues: Vec<f64>,
}

fn ladder(op: LadderOp, v: &DVector<f64>, from: &DeterminantSpace, to: &DeterminantSpace) -> DVector<f64> {
    let mut out = DVector::zeros(to.len());
    for (col, det) in from.basis().iter().enumerate() {
        if let Some((sign, x)) = apply_string(&[op], *det) {
            if let Some(row) = to.position(x) {
                out[row] += sign * v[col];
            }
        }
    }
    out
}

/// Ground-state energy of the `(n, ms2)` sector and every pole of the
/// exact Green's function for `pairs`, by full diagonalization.
pub fn lehmann_poles(
    ham: &SpinIntegralSet,
    n: usize,
    ms2: i32,
    pairs: &[(usize, usize)],
    components: Components,
) -> Result<(f64, Vec<Pole>)> {
    if let Some((p, q)) = pairs.iter().find(|(p, q)| *p >= ham.n_spin || *q >= ham.n_spin) {
        return Err(Error::Index(format!("orbital pair ({p}, {q}) exceeds {} spin orbitals", ham.n_spin)));
    }
    let space = Arc::new(enumerate_space(ham.n_spin, n, Some(ms2))?);
    let (values, vectors) = hermitian_eigen(&build_hamiltonian_matrix(ham, &space)?.to_dense());
    let e0 = values[0];
    let psi = vectors.column(0).into_owned();
    let mut poles = Vec::new();
    let mut sectors = Vec::new();
    for spin in [1, -1] {
        if components != Components::Addition && n > 0 {
            sectors.push((n - 1, ms2 - spin, true, spin));
        }
        if components != Components::Removal {
            sectors.push((n + 1, ms2 + spin, false, spin));
        }
    }
    for (m, ms, removal, spin) in sectors {
        let target = match enumerate_space(ham.n_spin, m, Some(ms)) {
            Ok(s) => Arc::new(s),
            Err(Error::EmptySpace(_)) => continue,
            Err(e) => return Err(e),
        };
        let (e, u) = hermitian_eigen(&build_hamiltonian_matrix(ham, &target)?.to_dense());
        let op = |p: usize| if removal { LadderOp::Annihilate(p) } else { LadderOp::Create(p) };
        let amplitude: Vec<Option<DVector<f64>>> = (0..ham.n_spin)
            .map(|p| {
                let spin_p = if p % 2 == 0 { 1 } else { -1 };
                (spin_p == spin).then(|| u.tr_mul(&ladder(op(p), &psi, &space, &target)))
            })
            .collect();
        for k in 0..e.len() {
            let residues: Vec<f64> = pairs
                .iter()
                .map(|&(p, q)| match (&amplitude[p], &amplitude[q]) {
                    // Removal: ⟨Ψ|a†_q|k⟩⟨k|a_p|Ψ⟩. Addition: ⟨Ψ|a_p|k⟩⟨k|a†_q|Ψ⟩.
                    (Some(ap), Some(aq)) => ap[k] * aq[k],
                    _ => 0.0,
                })
                .collect();
            poles.push(Pole {
                omega: if removal { e0 - e[k] } else { e[k] - e0 },
                removal,
                residues,
            });
        }
    }
    Ok((e0, poles))
}

/// Exact Green's function of the `(n, ms2)` ground state from its Lehmann
/// representation, broadened by `grid.eta`.
pub fn fci_lehmann_oracle(
    ham: &SpinIntegralSet,
    n: usize,
    ms2: i32,
    pairs: &[(usize, usize)],
    grid: &FrequencyGrid,
    components: Components,
) -> Result<GreensResult> {
    let (_, poles) = lehmann_poles(ham, n, ms2, pairs, components)?;
    let mut result = GreensResult::new(*grid, pairs);
    let omegas = grid.points();
    for pole in &poles {
        let eta = if pole.removal { -grid.eta } else { grid.eta };
        for (k, &r) in pole.residues.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let values: Vec<Complex<f64>> = omegas
                .iter()
                .map(|&w| Complex::new(r, 0.0) / Complex::new(w - pole.omega, eta))
                .collect();
            result.accumulate(k, pole.removal, &values);
        }
    }
    Ok(result)
}
