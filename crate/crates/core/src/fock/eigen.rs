use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use super::{OperatorMatrix, DENSE_LIMIT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenMethod {
    /// Dense up to `DENSE_LIMIT`, Davidson above.
    Auto,
    Dense,
    Davidson { tol: f64, max_iter: usize },
}

const DAVIDSON_TOL: f64 = 1e-10;
const DAVIDSON_MAX_ITER: usize = 500;
const DAVIDSON_MAX_SUBSPACE: usize = 40;

/// Flip `v` so that its largest-magnitude component (first among ties) is positive.
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Full eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        fix_sign(&mut v);
        vectors.set_column(j, &v);
    }
    (values, vectors)
}

/// Lowest eigenpair of a Hermitian operator matrix.
pub fn ground_state(m: &OperatorMatrix) -> Result<(f64, DVector<f64>)> {
    ground_state_with(m, EigenMethod::Auto)
}

pub fn ground_state_with(m: &OperatorMatrix, method: EigenMethod) -> Result<(f64, DVector<f64>)> {
    let asym = m.max_asymmetry();
    if asym >= 1e-10 {
        return Err(Error::NonHermitian(asym));
    }
    if m.dim() == 0 {
        return Err(Error::EmptySpace("cannot diagonalize an empty matrix".into()));
    }
    let method = match method {
        EigenMethod::Auto if m.dim() <= DENSE_LIMIT => EigenMethod::Dense,
        EigenMethod::Auto => EigenMethod::Davidson {
            tol: DAVIDSON_TOL,
            max_iter: DAVIDSON_MAX_ITER,
        },
        other => other,
    };
    match method {
        EigenMethod::Dense => {
            let (values, vectors) = hermitian_eigen(&m.to_dense());
            Ok((values[0], vectors.column(0).into_owned()))
        }
        EigenMethod::Davidson { tol, max_iter } => davidson(m, tol, max_iter),
        EigenMethod::Auto => unreachable!(),
    }
}

fn davidson(m: &OperatorMatrix, tol: f64, max_iter: usize) -> Result<(f64, DVector<f64>)> {
    let n = m.dim();
    let diag = m.diagonal();
    let start = (0..n).min_by(|&a, &b| diag[a].total_cmp(&diag[b])).unwrap();
    let mut v0 = DVector::zeros(n);
    v0[start] = 1.0;
    let mut basis: Vec<DVector<f64>> = vec![v0];
    let mut images: Vec<DVector<f64>> = vec![m.apply(&basis[0])];
    let mut residual = f64::INFINITY;
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let k = basis.len();
        let small = DMatrix::from_fn(k, k, |i, j| basis[i].dot(&images[j]));
        let small = (&small + small.transpose()) * 0.5;
        let (theta, y) = hermitian_eigen(&small);
        let theta = theta[0];
        let y = y.column(0);
        let mut x = DVector::zeros(n);
        let mut ax = DVector::zeros(n);
        for i in 0..k {
            x.axpy(y[i], &basis[i], 1.0);
            ax.axpy(y[i], &images[i], 1.0);
        }
        let r = &ax - &x * theta;
        residual = r.norm();
        history.push(residual);
        if residual < tol {
            fix_sign(&mut x);
            return Ok((theta, x));
        }
        let mut delta = DVector::from_fn(n, |i, _| {
            let d = theta - diag[i];
            if d.abs() < 1e-8 {
                r[i] / 1e-8_f64.copysign(d)
            } else {
                r[i] / d
            }
        });
        if basis.len() >= DAVIDSON_MAX_SUBSPACE {
            let ax_keep = ax.clone();
            basis = vec![x];
            images = vec![ax_keep];
        }
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&delta);
                delta.axpy(-c, b, 1.0);
            }
        }
        let norm = delta.norm();
        if norm < 1e-14 {
            break;
        }
        delta /= norm;
        images.push(m.apply(&delta));
        basis.push(delta);
    }
    Err(Error::Convergence {
        what: "Davidson eigensolver".into(),
        iterations: history.len(),
        residual,
        history,
    })
}

#[derive(Debug, Clone)]
pub struct RightEigenpair {
    pub value: Complex<f64>,
    /// Normalized right eigenvector; present for real eigenvalues only.
    pub vector: Option<DVector<f64>>,
}

/// All eigenvalues of a general real matrix, sorted by real part, with right
/// eigenvectors obtained by inverse iteration for the real ones.
pub fn right_eigenpairs(m: &DMatrix<f64>) -> Vec<RightEigenpair> {
    let n = m.nrows();
    let mut values: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let scale = m.amax().max(1.0);
    values
        .into_iter()
        .map(|value| {
            let vector = if value.im.abs() <= 1e-8 * scale {
                inverse_iteration(m, value.re, scale)
            } else {
                None
            };
            RightEigenpair { value, vector }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .take(n)
        .collect()
}

fn inverse_iteration(m: &DMatrix<f64>, lambda: f64, scale: f64) -> Option<DVector<f64>> {
    let n = m.nrows();
    let shift = lambda + 1e-10 * scale;
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 37 % 11) as f64));
    x /= x.norm();
    for _ in 0..4 {
        let y = lu.solve(&x)?;
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        x = y / norm;
    }
    fix_sign(&mut x);
    Some(x)
}
