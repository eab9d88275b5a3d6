use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use super::OperatorMatrix;
use crate::error::{Error, Result};

/// `Σ_k M^k / k!`, stopping at the first power that is exactly zero.
pub fn exp_nilpotent_dense(m: &DMatrix<f64>, max_power: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut out = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=max_power + 1 {
        term = (&term * m) / k as f64;
        if term.iter().all(|v| *v == 0.0) {
            return Ok(out);
        }
        out += &term;
    }
    Err(Error::NonNilpotent { max_power })
}

/// Exact exponential of an excitation (or de-excitation) operator matrix.
pub fn exp_nilpotent(m: &OperatorMatrix, max_power: usize) -> Result<OperatorMatrix> {
    let e = exp_nilpotent_dense(&m.to_dense(), max_power)?;
    OperatorMatrix::dense(m.space().clone(), e, false)
}

/// `exp(M) v` for a nilpotent `M` given only through its action.
pub fn exp_series(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    v: &DVector<f64>,
    max_power: usize,
) -> Result<DVector<f64>> {
    let mut out = v.clone();
    let mut term = v.clone();
    for k in 1..=max_power + 1 {
        term = apply(&term) / k as f64;
        if term.iter().all(|x| *x == 0.0) {
            return Ok(out);
        }
        out += &term;
    }
    Err(Error::NonNilpotent { max_power })
}

/// Unitary `exp(M)` of a real anti-Hermitian matrix, from the eigenvectors of
/// the Hermitian matrix `iM`: `exp(M) = V·diag(e^{−iλ})·V†`.
pub fn exp_antihermitian_dense(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] + m[(j, i)]).abs());
        }
    }
    if worst >= 1e-10 {
        return Err(Error::Shape(format!(
            "generator is not anti-Hermitian (max |M + M†| = {worst:.3e})"
        )));
    }
    if m.iter().all(|v| *v == 0.0) {
        return Ok(DMatrix::identity(n, n));
    }
    let im = m.map(|v| Complex::new(0.0, v));
    let eig = SymmetricEigen::new(im);
    let v = eig.eigenvectors;
    let phases = eig.eigenvalues.map(|l| Complex::new(0.0, -l).exp());
    let mut vd = v.clone();
    for (j, ph) in phases.iter().enumerate() {
        let mut col = vd.column_mut(j);
        col *= *ph;
    }
    let u = vd * v.adjoint();
    Ok(u.map(|z| z.re))
}

/// `exp(M)·V` for a real anti-Hermitian `M`, by Taylor steps of 1-norm at
/// most one half summed until the terms drop below rounding. Only the
/// columns of `V` are propagated, so `M` may be large.
pub fn exp_antihermitian_apply(m: &OperatorMatrix, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let asym = m.max_symmetric_part();
    if asym >= 1e-10 {
        return Err(Error::Shape(format!(
            "generator is not anti-Hermitian (max |M + M†| = {asym:.3e})"
        )));
    }
    let norm = m.one_norm();
    if norm == 0.0 {
        return Ok(v.clone());
    }
    let m = m.sparsified(0.1);
    let steps = (2.0 * norm).ceil().max(1.0) as usize;
    let scale = 1.0 / steps as f64;
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut sum = out.clone();
        for k in 1..=40 {
            term = m.apply_columns(&term) * (scale / k as f64);
            sum += &term;
            if term.amax() <= f64::EPSILON * 1e-3 * sum.amax() {
                break;
            }
        }
        out = sum;
    }
    Ok(out)
}

pub fn exp_antihermitian(m: &OperatorMatrix) -> Result<OperatorMatrix> {
    let u = exp_antihermitian_dense(&m.to_dense())?;
    OperatorMatrix::dense(m.space().clone(), u, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformMode {
    /// `exp(−A)·H·exp(A)` for an excitation operator `A`.
    Nilpotent { max_power: usize },
    /// `exp(A)†·H·exp(A)` for an anti-Hermitian `A`.
    Unitary,
}

pub fn similarity_transform(h: &OperatorMatrix, a: &OperatorMatrix, mode: TransformMode) -> Result<OperatorMatrix> {
    if h.space().basis() != a.space().basis() {
        return Err(Error::Shape("operator and transformation live on different bases".into()));
    }
    let hd = h.to_dense();
    let ad = a.to_dense();
    let (out, hermitian) = match mode {
        TransformMode::Nilpotent { max_power } => {
            let e = exp_nilpotent_dense(&ad, max_power)?;
            let einv = exp_nilpotent_dense(&(-&ad), max_power)?;
            (einv * hd * e, false)
        }
        TransformMode::Unitary => {
            let u = exp_antihermitian_dense(&ad)?;
            let mut m = u.transpose() * hd * &u;
            if h.is_hermitian_hint() {
                m = (&m + m.transpose()) * 0.5;
            }
            (m, h.is_hermitian_hint())
        }
    };
    Ok(OperatorMatrix::dense(h.space().clone(), out, false)?.with_hint_if_symmetric(hermitian))
}
