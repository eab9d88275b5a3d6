use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{build_sigma_ext, SigmaOperator};
use crate::cc::ClusterOperator;
use crate::error::{Error, Result};
use crate::fock::{
    build_hamiltonian_matrix, build_operator_matrix, enumerate_space, exp_antihermitian_apply, hermitian_eigen,
    max_asymmetry, Determinant, OperatorMatrix, ALPHA_MASK,
};
use crate::hamiltonian::{ReferencePartition, SpinIntegralSet};
use crate::ses::{ActiveProjector, EffectiveHamiltonian, Provenance, SesAlgebra};

/// Commutator-truncated approximants of `e^{−σ} H e^{σ}`.
///
/// With `C₁ = [H_N, σ]`, `C₂ = [C₁, σ]`, `F₂ = [[F_N, σ], σ]` and
/// `F₃ = [F₂, σ]`:
///
/// | variant | operator |
/// |---|---|
/// | A1 | `H` |
/// | A3 | `H + C₁` |
/// | A4 | `H + C₁ + ½F₂` |
/// | A6 | `H + C₁ + ½C₂` |
/// | A7 | `H + C₁ + ½C₂ + ⅙F₃` |
///
/// A2 and A5 name perturbation-order-filtered forms of A4 and A7. Filtering
/// by order is not defined for a generator built from converged amplitudes,
/// so they evaluate as A4 and A7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
}

impl Variant {
    pub const PRIMARY: [Variant; 5] = [Variant::A1, Variant::A3, Variant::A4, Variant::A6, Variant::A7];

    /// The variant actually assembled.
    pub fn resolved(self) -> Variant {
        match self {
            Variant::A2 => Variant::A4,
            Variant::A5 => Variant::A7,
            v => v,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self {
            Variant::A1 => 1,
            Variant::A2 => 2,
            Variant::A3 => 3,
            Variant::A4 => 4,
            Variant::A5 => 5,
            Variant::A6 => 6,
            Variant::A7 => 7,
        };
        write!(f, "A{k}")
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase().replace(['(', ')'], "");
        Ok(match t.as_str() {
            "A1" => Variant::A1,
            "A2" => Variant::A2,
            "A3" => Variant::A3,
            "A4" => Variant::A4,
            "A5" => Variant::A5,
            "A6" => Variant::A6,
            "A7" => Variant::A7,
            _ => return Err(Error::Usage(format!("unknown downfolding variant {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuccKind {
    Exact,
    Approximant(Variant),
}

fn check_same_basis(h: &OperatorMatrix, sigma: &SigmaOperator) -> Result<()> {
    if h.space().basis() != sigma.matrix.space().basis() {
        return Err(Error::Shape("Hamiltonian and σ live on different bases".into()));
    }
    Ok(())
}

/// Columns of the parent basis that make up the active space.
fn embedding_columns(proj: &ActiveProjector, n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, proj.embedding.len());
    for (j, &row) in proj.embedding.iter().enumerate() {
        p[(row, j)] = 1.0;
    }
    p
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Exact unitary transform of one sector, projected on the active space:
/// `Wᵀ H W` with `W = e^{σ} P`, since `e^{−σ} = (e^{σ})ᵀ`.
fn exact_block(h: &OperatorMatrix, sigma: &SigmaOperator, alg: &SesAlgebra) -> Result<OperatorMatrix> {
    check_same_basis(h, sigma)?;
    let proj = ActiveProjector::new(alg, h.space())?;
    let w = exp_antihermitian_apply(&sigma.matrix, &embedding_columns(&proj, h.dim()))?;
    let block = symmetrize(w.tr_mul(&h.apply_columns(&w)));
    OperatorMatrix::dense(proj.space, block, true)
}

/// Approximant of one sector plus the weighted asymmetry of its projected
/// commutator terms, `Σ_k |c_k|·max|X_k − X_kᵀ|`.
///
/// With `V_b = σ^b P` and `σᵀ = −σ`, every projected term
/// `P σ^a X σ^b P` equals `(−1)^a V_aᵀ X V_b`, so only the active columns
/// are ever propagated.
fn approximant_block(
    h: &OperatorMatrix,
    f_n: &OperatorMatrix,
    sigma: &SigmaOperator,
    variant: Variant,
    alg: &SesAlgebra,
) -> Result<(OperatorMatrix, f64)> {
    check_same_basis(h, sigma)?;
    let proj = ActiveProjector::new(alg, h.space())?;
    let s = sigma.matrix.sparsified(0.1);
    let mut v = vec![embedding_columns(&proj, h.dim())];
    for b in 1..4 {
        let next = s.apply_columns(&v[b - 1]);
        v.push(next);
    }
    let variant = variant.resolved();
    let hv: Vec<DMatrix<f64>> = v.iter().take(3).map(|x| h.apply_columns(x)).collect();
    let mut m = v[0].tr_mul(&hv[0]);
    let mut terms: Vec<(f64, DMatrix<f64>)> = Vec::new();
    if variant != Variant::A1 {
        // [H_N, σ] = [H, σ]: the scalar ⟨Φ|H|Φ⟩ commutes with everything.
        terms.push((1.0, v[0].tr_mul(&hv[1]) + v[1].tr_mul(&hv[0])));
        if matches!(variant, Variant::A6 | Variant::A7) {
            let c2 = v[0].tr_mul(&hv[2]) + v[1].tr_mul(&hv[1]) * 2.0 + v[2].tr_mul(&hv[0]);
            terms.push((0.5, c2));
        }
        if matches!(variant, Variant::A4 | Variant::A7) {
            let fv: Vec<DMatrix<f64>> = v.iter().map(|x| f_n.apply_columns(x)).collect();
            if variant == Variant::A7 {
                let f3 = v[0].tr_mul(&fv[3]) + v[1].tr_mul(&fv[2]) * 3.0 + v[2].tr_mul(&fv[1]) * 3.0 + v[3].tr_mul(&fv[0]);
                terms.push((1.0 / 6.0, f3));
            } else {
                let f2 = v[0].tr_mul(&fv[2]) + v[1].tr_mul(&fv[1]) * 2.0 + v[2].tr_mul(&fv[0]);
                terms.push((0.5, f2));
            }
        }
    }
    let mut asymmetry = 0.0;
    for (c, x) in &terms {
        asymmetry += c.abs() * max_asymmetry(x);
        m += x * *c;
    }
    Ok((OperatorMatrix::dense(proj.space, symmetrize(m), true)?, asymmetry))
}

/// `P e^{−σ} H e^{σ} P` with the exact unitary exponential.
pub fn exact_ducc_heff(h: &OperatorMatrix, sigma: &SigmaOperator, alg: &SesAlgebra) -> Result<EffectiveHamiltonian> {
    if let Some((label, _)) = sigma.generator.iter().find(|(l, _)| alg.contains_label(l)) {
        return Err(Error::Contamination(format!("σ contains {label}, internal to {alg}")));
    }
    Ok(EffectiveHamiltonian {
        matrix: exact_block(h, sigma, alg)?,
        provenance: Provenance::DuccExact,
        algebra: alg.clone(),
        e_shift: 0.0,
        asymmetry: None,
        sectors: Vec::new(),
    })
}

/// The approximant `variant` assembled at the matrix level, symmetrized
/// by `(M + Mᵀ)/2` and projected on the active space of `alg`.
pub fn commutator_heff(
    h: &OperatorMatrix,
    sigma: &SigmaOperator,
    variant: Variant,
    partition: &ReferencePartition,
    alg: &SesAlgebra,
) -> Result<EffectiveHamiltonian> {
    if let Some((label, _)) = sigma.generator.iter().find(|(l, _)| alg.contains_label(l)) {
        return Err(Error::Contamination(format!("σ contains {label}, internal to {alg}")));
    }
    let f_n = build_operator_matrix(&partition.f_n, h.space());
    let (matrix, asymmetry) = approximant_block(h, &f_n, sigma, variant, alg)?;
    Ok(EffectiveHamiltonian {
        matrix,
        provenance: Provenance::DuccApproximant(variant),
        algebra: alg.clone(),
        e_shift: 0.0,
        asymmetry: Some(asymmetry),
        sectors: Vec::new(),
    })
}

/// Sectors with one electron fewer, the same number, and one more, in
/// every `M_S` that leaves at least one active determinant.
pub fn neighbour_sectors(alg: &SesAlgebra, n_electrons: usize) -> Vec<(usize, Option<i32>)> {
    let core = Determinant(alg.reference.bits() & !(alg.r_mask() | alg.s_mask()));
    let active = alg.r_mask() | alg.s_mask();
    let n_alpha = (active & ALPHA_MASK).count_ones() as usize;
    let n_beta = (active & !ALPHA_MASK).count_ones() as usize;
    let mut out = Vec::new();
    for n in n_electrons.saturating_sub(1)..=n_electrons + 1 {
        let Some(k) = n.checked_sub(core.n_electrons()) else {
            continue;
        };
        if k > n_alpha + n_beta {
            continue;
        }
        for a in k.saturating_sub(n_beta)..=k.min(n_alpha) {
            out.push((n, Some(core.ms2() + a as i32 - (k - a) as i32)));
        }
    }
    out
}

/// Downfolded Hamiltonian built from integrals: the block of the
/// reference sector plus blocks on each of `extra` (electron count and
/// `M_S` filter). Sectors with no active determinant are skipped.
pub fn ducc_heff_with_sectors(
    ham: &SpinIntegralSet,
    partition: &ReferencePartition,
    t_ext: &ClusterOperator,
    alg: &SesAlgebra,
    kind: DuccKind,
    extra: &[(usize, Option<i32>)],
) -> Result<EffectiveHamiltonian> {
    let n_e = partition.reference.n_electrons();
    let primary = (n_e, Some(partition.reference.ms2()));
    let mut blocks = Vec::new();
    let mut asymmetry: f64 = 0.0;
    for &(n, ms2) in std::iter::once(&primary).chain(extra.iter().filter(|s| **s != primary)) {
        let space = match enumerate_space(ham.n_spin, n, ms2) {
            Ok(s) => Arc::new(s),
            Err(Error::EmptySpace(_)) => continue,
            Err(e) => return Err(e),
        };
        if !space.basis().iter().any(|d| alg.contains_determinant(*d)) {
            continue;
        }
        let h = build_hamiltonian_matrix(ham, &space)?;
        let sigma = build_sigma_ext(t_ext, alg, &space)?;
        let block = match kind {
            DuccKind::Exact => exact_block(&h, &sigma, alg)?,
            DuccKind::Approximant(v) => {
                let f_n = build_operator_matrix(&partition.f_n, &space);
                let (block, asym) = approximant_block(&h, &f_n, &sigma, v, alg)?;
                asymmetry = asymmetry.max(asym);
                block
            }
        };
        blocks.push(block);
    }
    if blocks.is_empty() {
        return Err(Error::EmptySpace("the reference sector has no active determinants".into()));
    }
    let matrix = blocks.remove(0);
    let (provenance, asymmetry) = match kind {
        DuccKind::Exact => (Provenance::DuccExact, None),
        DuccKind::Approximant(v) => (Provenance::DuccApproximant(v), Some(asymmetry)),
    };
    Ok(EffectiveHamiltonian {
        matrix,
        provenance,
        algebra: alg.clone(),
        e_shift: 0.0,
        asymmetry,
        sectors: blocks,
    })
}

/// Ascending eigenvalues (shifted by `e_shift`) and the ground-state vector
/// of a Hermitian downfolded Hamiltonian.
pub fn diagonalize_active(heff: &EffectiveHamiltonian) -> Result<(Vec<f64>, DVector<f64>)> {
    if heff.provenance == Provenance::SesCc {
        return Err(Error::Usage("SES-CC Hamiltonians are not Hermitian; use the right-eigenpair path".into()));
    }
    let m = heff.matrix.to_dense();
    let asym = max_asymmetry(&m);
    if asym >= 1e-10 {
        return Err(Error::NonHermitian(asym));
    }
    let (values, vectors) = hermitian_eigen(&m);
    Ok((
        values.iter().map(|v| v + heff.e_shift).collect(),
        vectors.column(0).into_owned(),
    ))
}
