use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{ActiveProjector, SesAlgebra};
use crate::cc::{CcResult, ClusterOperator};
use crate::ducc::Variant;
use crate::error::{Error, Result};
use crate::fock::{
    basis_vector, exp_series, right_eigenpairs, DeterminantSpace, ExcitationTable, OperatorMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// `P e^{−T_ext} H e^{T_ext} P`, non-Hermitian.
    SesCc,
    /// `P e^{−σ_ext} H e^{σ_ext} P`.
    DuccExact,
    /// Commutator-truncated approximant of the unitary transform.
    DuccApproximant(Variant),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::SesCc => f.write_str("SES-CC"),
            Provenance::DuccExact => f.write_str("DUCC-exact"),
            Provenance::DuccApproximant(v) => write!(f, "DUCC-{v}"),
        }
    }
}

/// A downfolded Hamiltonian on the active-space determinant basis.
///
/// `matrix` is the block of the reference's particle-number and spin
/// sector. `sectors` optionally holds further blocks of the same operator
/// on other active-space sectors (different electron count or `M_S`),
/// which the Green's-function and coefficient-extraction code consume.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub matrix: OperatorMatrix,
    pub provenance: Provenance,
    pub algebra: SesAlgebra,
    /// Scalar added to every eigenvalue. Matrices here already carry the
    /// core energy, so this is 0 unless a caller shifts the operator.
    pub e_shift: f64,
    /// For approximants: `max |M − Mᵀ|` of the correction `M − H` before
    /// symmetrization.
    pub asymmetry: Option<f64>,
    pub sectors: Vec<OperatorMatrix>,
}

impl EffectiveHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// All blocks, the reference sector first.
    pub fn blocks(&self) -> impl Iterator<Item = &OperatorMatrix> {
        std::iter::once(&self.matrix).chain(self.sectors.iter())
    }

    /// The block on the active sector with `n_electrons` electrons and the
    /// given `M_S` filter, if present.
    pub fn sector(&self, n_electrons: usize, ms2: Option<i32>) -> Option<&OperatorMatrix> {
        self.blocks()
            .find(|b| b.space().n_electrons == n_electrons && b.space().ms2 == ms2)
    }
}

fn check_external(t_ext: &ClusterOperator, h: &SesAlgebra) -> Result<()> {
    if let Some((label, _)) = t_ext.iter().find(|(l, _)| h.contains_label(l)) {
        return Err(Error::Contamination(format!(
            "amplitude {label} is internal to {h} but was passed as external"
        )));
    }
    Ok(())
}

/// `P·e^{−T}·M·e^{T}·P` restricted to the active determinants of `h`,
/// computed column by column with exact vector exponentials.
pub(crate) fn transformed_block(
    m: &OperatorMatrix,
    t: &ClusterOperator,
    h: &SesAlgebra,
) -> Result<(Arc<DeterminantSpace>, DMatrix<f64>)> {
    let space = m.space();
    let proj = ActiveProjector::new(h, space)?;
    let labels = t.labels();
    let amps = t.values();
    let table = ExcitationTable::new(&labels, space)?;
    let max_power = space.n_electrons + 2;
    let k = proj.embedding.len();
    let mut out = DMatrix::zeros(k, k);
    for (j, &col) in proj.embedding.iter().enumerate() {
        let mut e = DVector::zeros(space.len());
        e[col] = 1.0;
        let w = exp_series(|x| table.apply(&amps, x), &e, max_power)?;
        let hw = m.apply(&w);
        let v = exp_series(|x| -table.apply(&amps, x), &hw, max_power)?;
        for (i, &row) in proj.embedding.iter().enumerate() {
            out[(i, j)] = v[row];
        }
    }
    Ok((proj.space, out))
}

/// Non-Hermitian downfolded Hamiltonian `P e^{−T_ext} H e^{T_ext} P` on the
/// active space of `h`.
pub fn build_heff_ses(h_matrix: &OperatorMatrix, t_ext: &ClusterOperator, h: &SesAlgebra) -> Result<EffectiveHamiltonian> {
    check_external(t_ext, h)?;
    let (space, m) = transformed_block(h_matrix, t_ext, h)?;
    Ok(EffectiveHamiltonian {
        matrix: OperatorMatrix::dense(space, m, false)?,
        provenance: Provenance::SesCc,
        algebra: h.clone(),
        e_shift: 0.0,
        asymmetry: None,
        sectors: Vec::new(),
    })
}

/// `e^{T_int}|Φ⟩` on the active basis of `heff`.
fn internal_wavefunction(heff: &EffectiveHamiltonian, t_int: &ClusterOperator) -> Result<DVector<f64>> {
    let space = heff.matrix.space();
    let phi = basis_vector(space, heff.algebra.reference)?;
    let labels = t_int.labels();
    let amps = t_int.values();
    let table = ExcitationTable::new(&labels, space)?;
    exp_series(|x| table.apply(&amps, x), &phi, space.n_electrons + 2)
}

/// `‖(H^eff − e_cc)·e^{T_int}|Φ⟩‖₂` on the active basis; zero exactly when
/// the CC energy is an eigenvalue of `H^eff` with eigenvector `e^{T_int}|Φ⟩`.
pub fn verify_ses_theorem(heff: &EffectiveHamiltonian, t_int: &ClusterOperator, e_cc: f64) -> Result<f64> {
    if heff.provenance != Provenance::SesCc {
        return Err(Error::Usage(format!(
            "the residual check applies to SES-CC Hamiltonians, not {}",
            heff.provenance
        )));
    }
    if let Some((label, _)) = t_int.iter().find(|(l, _)| !heff.algebra.contains_label(l)) {
        return Err(Error::Contamination(format!(
            "amplitude {label} is external to {}",
            heff.algebra
        )));
    }
    let psi = internal_wavefunction(heff, t_int)?;
    let r = heff.matrix.apply(&psi) - &psi * (e_cc - heff.e_shift);
    Ok(r.norm())
}

/// The eigenvalue of `H^eff` whose right eigenvector overlaps most with
/// `e^{T_int}|Φ⟩`, and that overlap (normalized).
pub fn cc_root(heff: &EffectiveHamiltonian, t_int: &ClusterOperator) -> Result<(f64, f64)> {
    let psi = internal_wavefunction(heff, t_int)?;
    let psi = &psi / psi.norm();
    let pairs = right_eigenpairs(&heff.matrix.to_dense());
    pairs
        .iter()
        .filter_map(|p| p.vector.as_ref().map(|v| (p.value.re, psi.dot(v).abs())))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(e, o)| (e + heff.e_shift, o))
        .ok_or_else(|| Error::LinearSolve("no real eigenpair of the effective Hamiltonian".into()))
}

/// One row of the SES verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct SesReportRow {
    pub algebra: String,
    pub active_dim: usize,
    pub residual: f64,
    pub eigenvalue: f64,
    pub delta_e: f64,
}

/// Build and check the effective Hamiltonian of every algebra against a
/// converged CC solution.
pub fn ses_report(h: &OperatorMatrix, cc: &CcResult, algebras: &[SesAlgebra]) -> Result<Vec<SesReportRow>> {
    algebras
        .iter()
        .map(|alg| {
            let (t_int, t_ext) = super::partition_cluster(&cc.t, alg);
            let heff = build_heff_ses(h, &t_ext, alg)?;
            let residual = verify_ses_theorem(&heff, &t_int, cc.energy)?;
            let (eigenvalue, _) = cc_root(&heff, &t_int)?;
            Ok(SesReportRow {
                algebra: alg.descriptor(),
                active_dim: heff.dim(),
                residual,
                eigenvalue,
                delta_e: (eigenvalue - cc.energy).abs(),
            })
        })
        .collect()
}
