use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{ClusterOperator, ExcitationLabel};
use crate::error::{Error, Result};
use crate::fock::{exp_series, Determinant, DeterminantSpace, ExcitationTable, OperatorMatrix};

/// The projected equations `r_μ = ⟨Φ_μ| e^{−T} H e^{T} |Φ⟩` for a fixed
/// manifold, evaluated by exact vector exponentials.
#[derive(Debug, Clone)]
pub struct CcEquations<'a> {
    h: &'a OperatorMatrix,
    reference: Determinant,
    labels: Vec<ExcitationLabel>,
    table: ExcitationTable,
    ref_pos: usize,
    /// Position of `D_μ` in the basis and the sign `s_μ` of `E_μ|Φ⟩ = s_μ|D_μ⟩`.
    targets: Vec<(usize, f64)>,
    max_power: usize,
}

impl<'a> CcEquations<'a> {
    pub fn new(h: &'a OperatorMatrix, reference: Determinant, labels: &[ExcitationLabel]) -> Result<Self> {
        let space = h.space();
        let ref_pos = space
            .position(reference)
            .ok_or_else(|| Error::Usage(format!("reference {reference:?} is not in the basis")))?;
        let mut targets = Vec::with_capacity(labels.len());
        for label in labels {
            if !label.fits_reference(reference) {
                return Err(Error::Usage(format!("{label} is not an excitation out of the reference")));
            }
            let (sign, det) = label.excite(reference).expect("label fits the reference");
            let pos = space
                .position(det)
                .ok_or_else(|| Error::Usage(format!("excitation {label} leaves the determinant basis")))?;
            targets.push((pos, sign));
        }
        let table = ExcitationTable::new(labels, space)?;
        Ok(Self {
            h,
            reference,
            labels: labels.to_vec(),
            table,
            ref_pos,
            targets,
            max_power: space.n_electrons + 2,
        })
    }

    pub fn labels(&self) -> &[ExcitationLabel] {
        &self.labels
    }

    pub fn space(&self) -> &DeterminantSpace {
        self.h.space()
    }

    pub fn reference_position(&self) -> usize {
        self.ref_pos
    }

    pub fn targets(&self) -> &[(usize, f64)] {
        &self.targets
    }

    /// `e^{T} v`.
    pub fn exp_t(&self, t: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        exp_series(|x| self.table.apply(t, x), v, self.max_power)
    }

    /// `e^{−T} v`.
    pub fn exp_minus_t(&self, t: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        exp_series(|x| -self.table.apply(t, x), v, self.max_power)
    }

    /// `(e^{−T})ᵀ v`, i.e. the row vector `vᵀ e^{−T}` as a column.
    pub fn exp_minus_t_transpose(&self, t: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        exp_series(|x| -self.table.apply_transpose(t, x), v, self.max_power)
    }

    /// `e^{−T} H e^{T} v`.
    pub fn transformed(&self, t: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        let w = self.exp_t(t, v)?;
        self.exp_minus_t(t, &self.h.apply(&w))
    }

    /// `e^{T}|Φ⟩`.
    pub fn wavefunction(&self, t: &[f64]) -> Result<DVector<f64>> {
        let mut phi = DVector::zeros(self.h.dim());
        phi[self.ref_pos] = 1.0;
        self.exp_t(t, &phi)
    }

    /// Energy and residual vector at amplitudes `t` (ordered as the labels).
    pub fn evaluate(&self, t: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut phi = DVector::zeros(self.h.dim());
        phi[self.ref_pos] = 1.0;
        let w = self.transformed(t, &phi)?;
        let r = self.targets.iter().map(|&(pos, sign)| sign * w[pos]).collect();
        Ok((w[self.ref_pos], r))
    }

    pub fn amplitudes_of(&self, t: &ClusterOperator) -> Vec<f64> {
        self.labels.iter().map(|l| t.get(l)).collect()
    }

    pub fn to_operator(&self, values: &[f64]) -> ClusterOperator {
        ClusterOperator::from_pairs(self.reference, self.labels.iter().cloned().zip(values.iter().copied()))
            .expect("labels were validated against the reference")
    }

    fn denominators(&self, kind: &Denominators) -> Result<Vec<f64>> {
        let diag = self.h.diagonal();
        self.labels
            .iter()
            .zip(&self.targets)
            .map(|(label, &(pos, _))| {
                let d = match kind {
                    Denominators::FockDiagonal(f) => {
                        label.occupied().iter().map(|&i| f[i]).sum::<f64>()
                            - label.virtual_orbitals().iter().map(|&a| f[a]).sum::<f64>()
                    }
                    Denominators::MatrixDiagonal => diag[self.ref_pos] - diag[pos],
                };
                if d.abs() < 1e-8 {
                    Err(Error::QuasiDegenerate {
                        label: label.to_string(),
                        denominator: d,
                    })
                } else {
                    Ok(d)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Denominators {
    /// `Σ_occ F_ii − Σ_virt F_aa` from a spin-orbital Fock diagonal.
    FockDiagonal(Vec<f64>),
    /// `H_ΦΦ − H_μμ` from the diagonal of the matrix itself.
    MatrixDiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Zero,
    /// First-order amplitudes `r_μ(0) / D_μ`.
    Mp2,
    Amplitudes(ClusterOperator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcOptions {
    /// Convergence threshold on `max |r_μ|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of stored iterates for DIIS; 0 disables extrapolation.
    pub diis_depth: usize,
    pub initial: InitialGuess,
    pub denominators: Denominators,
}

impl Default for CcOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            diis_depth: 8,
            initial: InitialGuess::Zero,
            denominators: Denominators::MatrixDiagonal,
        }
    }
}

impl CcOptions {
    /// Default options with Møller–Plesset denominators from a Fock diagonal.
    pub fn with_fock(orbital_energies: Vec<f64>) -> Self {
        Self {
            denominators: Denominators::FockDiagonal(orbital_energies),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcResult {
    pub t: ClusterOperator,
    /// Total energy `⟨Φ|e^{−T} H e^{T}|Φ⟩`.
    pub energy: f64,
    pub iterations: usize,
    /// Final `max |r_μ|`.
    pub residual_norm: f64,
    pub history: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Pulay extrapolation over stored `(t + r/D, r)` pairs.
fn diis_extrapolate(stored: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Option<Vec<f64>> {
    let k = stored.len();
    let mut b = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            b[(i, j)] = stored[i].1.iter().zip(&stored[j].1).map(|(x, y)| x * y).sum();
        }
        b[(i, k)] = -1.0;
        b[(k, i)] = -1.0;
    }
    let scale = (0..k).map(|i| b[(i, i)]).fold(0.0_f64, f64::max);
    if scale <= 0.0 {
        return None;
    }
    for i in 0..k {
        for j in 0..k {
            b[(i, j)] /= scale;
        }
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = -1.0;
    let c = b.lu().solve(&rhs)?;
    if c.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let n = stored[0].0.len();
    let mut out = vec![0.0; n];
    for i in 0..k {
        for (o, x) in out.iter_mut().zip(&stored[i].0) {
            *o += c[i] * x;
        }
    }
    Some(out)
}

/// Solve the CC equations for `manifold` with `h` given on a basis that
/// contains the reference and every `E_μ|Φ⟩`.
pub fn solve_cc(
    h: &OperatorMatrix,
    reference: Determinant,
    manifold: &[ExcitationLabel],
    opts: &CcOptions,
) -> Result<CcResult> {
    let eq = CcEquations::new(h, reference, manifold)?;
    let d = eq.denominators(&opts.denominators)?;
    let mut t = match &opts.initial {
        InitialGuess::Zero => vec![0.0; manifold.len()],
        InitialGuess::Mp2 => {
            let (_, r0) = eq.evaluate(&vec![0.0; manifold.len()])?;
            r0.iter().zip(&d).map(|(r, d)| r / d).collect()
        }
        InitialGuess::Amplitudes(t0) => eq.amplitudes_of(t0),
    };
    let mut stored: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut history = Vec::new();
    for iteration in 0..=opts.max_iter {
        let (energy, r) = eq.evaluate(&t)?;
        let norm = max_abs(&r);
        history.push(norm);
        if !norm.is_finite() {
            break;
        }
        if norm <= opts.tol {
            return Ok(CcResult {
                t: eq.to_operator(&t),
                energy,
                iterations: iteration,
                residual_norm: norm,
                history,
            });
        }
        let updated: Vec<f64> = t.iter().zip(&r).zip(&d).map(|((t, r), d)| t + r / d).collect();
        if opts.diis_depth == 0 {
            t = updated;
            continue;
        }
        stored.push_back((updated.clone(), r));
        while stored.len() > opts.diis_depth {
            stored.pop_front();
        }
        t = if stored.len() >= 2 {
            diis_extrapolate(&stored).unwrap_or(updated)
        } else {
            updated
        };
    }
    Err(Error::Convergence {
        what: "coupled-cluster amplitudes".into(),
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
