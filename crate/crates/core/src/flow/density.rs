use nalgebra::DMatrix;

use super::plan::AmplitudePool;
use crate::cc::{left_vector, solve_lambda, CcEquations};
use crate::error::Result;
use crate::fock::{apply_excitation, OperatorMatrix};
use crate::ses::{build_heff_ses, partition_cluster, SesAlgebra};

/// One-particle density of an active-space problem of a flow.
#[derive(Debug, Clone)]
pub struct FlowDensity {
    pub algebra: SesAlgebra,
    /// Active spin orbitals indexing `gamma`.
    pub orbitals: Vec<usize>,
    /// `γ_PQ = ⟨Φ|(1+Λ_int) e^{−T_int} a†_P a_Q e^{T_int}|Φ⟩`.
    pub gamma: DMatrix<f64>,
}

/// Density of algebra `alg` at the pooled amplitudes. The local Λ is
/// solved on `P e^{−T_ext} H e^{T_ext} P` over the pool labels inside
/// `alg`.
pub fn flow_density(alg: &SesAlgebra, pool: &AmplitudePool, h: &OperatorMatrix) -> Result<FlowDensity> {
    let (t_int, t_ext) = partition_cluster(&pool.amplitudes, alg);
    let heff = build_heff_ses(h, &t_ext, alg)?;
    let labels = t_int.labels();
    let lambda = solve_lambda(&heff.matrix, &t_int, &labels, 1e-10)?;
    let eq = CcEquations::new(&heff.matrix, alg.reference, &labels)?;
    let amps = t_int.values();
    let ket = eq.wavefunction(&amps)?;
    let bra = eq.exp_minus_t_transpose(&amps, &left_vector(&heff.matrix, alg.reference, &lambda)?)?;
    let space = heff.matrix.space();
    let orbitals = alg.active_orbitals();
    let n = orbitals.len();
    let mut gamma = DMatrix::zeros(n, n);
    for (col, det) in space.basis().iter().enumerate() {
        if ket[col] == 0.0 {
            continue;
        }
        for (a, &p) in orbitals.iter().enumerate() {
            for (b, &q) in orbitals.iter().enumerate() {
                if let Some((sign, x)) = apply_excitation(p, q, *det) {
                    if let Some(row) = space.position(x) {
                        gamma[(a, b)] += bra[row] * sign * ket[col];
                    }
                }
            }
        }
    }
    Ok(FlowDensity {
        algebra: alg.clone(),
        orbitals,
        gamma,
    })
}
