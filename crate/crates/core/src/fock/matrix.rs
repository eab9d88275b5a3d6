use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Determinant, DeterminantSpace, LadderOp};
use crate::cc::{ClusterOperator, ExcitationLabel};
use crate::error::{Error, Result};
use crate::hamiltonian::SpinIntegralSet;

/// Bases larger than this are stored sparse and diagonalized iteratively.
pub const DENSE_LIMIT: usize = 4000;

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col = Vec::with_capacity(triplets.len());
        let mut val: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
                continue;
            }
            col.push(c);
            val.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, col, val }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col[k] == r {
                    d[r] += self.val[k];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col[k])] += self.val[k];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col[k];
                worst = worst.max((self.val[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.col[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.val[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

/// Matrix of an operator in a determinant basis; rows and columns are both
/// indexed by `space`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    space: Arc<DeterminantSpace>,
    data: MatrixData,
    hermitian_hint: bool,
}

impl OperatorMatrix {
    /// Wrap a dense matrix. With `hermitian_hint` the matrix must be
    /// symmetric to `1e-10`.
    pub fn dense(space: Arc<DeterminantSpace>, m: DMatrix<f64>, hermitian_hint: bool) -> Result<Self> {
        if m.nrows() != space.len() || m.ncols() != space.len() {
            return Err(Error::Shape(format!(
                "matrix is {}x{} but the basis has {} determinants",
                m.nrows(),
                m.ncols(),
                space.len()
            )));
        }
        let out = Self {
            space,
            data: MatrixData::Dense(m),
            hermitian_hint,
        };
        if hermitian_hint {
            let asym = out.max_asymmetry();
            if asym >= 1e-10 {
                return Err(Error::NonHermitian(asym));
            }
        }
        Ok(out)
    }

    pub fn sparse(space: Arc<DeterminantSpace>, m: CsrMatrix, hermitian_hint: bool) -> Result<Self> {
        if m.n != space.len() {
            return Err(Error::Shape("sparse matrix does not match the basis".into()));
        }
        Ok(Self {
            space,
            data: MatrixData::Sparse(m),
            hermitian_hint,
        })
    }

    pub fn zeros(space: Arc<DeterminantSpace>) -> Self {
        let n = space.len();
        Self {
            space,
            data: MatrixData::Dense(DMatrix::zeros(n, n)),
            hermitian_hint: true,
        }
    }

    pub fn identity(space: Arc<DeterminantSpace>) -> Self {
        let n = space.len();
        Self {
            space,
            data: MatrixData::Dense(DMatrix::identity(n, n)),
            hermitian_hint: true,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.space.len()
    }

    #[inline]
    pub fn space(&self) -> &Arc<DeterminantSpace> {
        &self.space
    }

    #[inline]
    pub fn data(&self) -> &MatrixData {
        &self.data
    }

    #[inline]
    pub fn is_hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    /// Dense view when stored dense.
    pub fn as_dense(&self) -> Option<&DMatrix<f64>> {
        match &self.data {
            MatrixData::Dense(m) => Some(m),
            MatrixData::Sparse(_) => None,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.data {
            MatrixData::Dense(m) => m.clone(),
            MatrixData::Sparse(m) => m.to_dense(),
        }
    }

    pub fn into_dense(self) -> DMatrix<f64> {
        match self.data {
            MatrixData::Dense(m) => m,
            MatrixData::Sparse(m) => m.to_dense(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.data {
            MatrixData::Dense(m) => m * x,
            MatrixData::Sparse(m) => m.mul_vec(x),
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        match &self.data {
            MatrixData::Dense(m) => m.diagonal(),
            MatrixData::Sparse(m) => m.diagonal(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().sum()
    }

    /// `max |M − Mᵀ|`.
    pub fn max_asymmetry(&self) -> f64 {
        match &self.data {
            MatrixData::Dense(m) => max_asymmetry(m),
            MatrixData::Sparse(m) => m.max_asymmetry(),
        }
    }

    /// `max |M + Mᵀ|`, zero for an anti-Hermitian matrix.
    pub fn max_symmetric_part(&self) -> f64 {
        let m = self.to_dense();
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((m[(i, j)] + m[(j, i)]).abs());
            }
        }
        worst
    }

    /// Largest column sum of absolute values.
    pub fn one_norm(&self) -> f64 {
        let m = self.to_dense();
        m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `M·V` for a block of column vectors.
    pub fn apply_columns(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.data {
            MatrixData::Dense(m) => m * v,
            MatrixData::Sparse(m) => {
                let mut out = DMatrix::zeros(v.nrows(), v.ncols());
                for (j, col) in v.column_iter().enumerate() {
                    out.set_column(j, &m.mul_vec(&col.into_owned()));
                }
                out
            }
        }
    }

    /// The same operator stored sparsely when at most `fraction` of its
    /// entries are nonzero.
    pub fn sparsified(&self, fraction: f64) -> OperatorMatrix {
        match &self.data {
            MatrixData::Dense(m) => {
                let nnz = m.iter().filter(|x| **x != 0.0).count();
                if (nnz as f64) > fraction * m.len() as f64 {
                    return self.clone();
                }
                let mut triplets = Vec::with_capacity(nnz);
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)] != 0.0 {
                            triplets.push((i, j, m[(i, j)]));
                        }
                    }
                }
                OperatorMatrix {
                    space: self.space.clone(),
                    data: MatrixData::Sparse(CsrMatrix::from_triplets(m.nrows(), triplets)),
                    hermitian_hint: self.hermitian_hint,
                }
            }
            MatrixData::Sparse(_) => self.clone(),
        }
    }

    /// Rows and columns restricted to `positions` of the current basis.
    pub fn project(&self, sub: Arc<DeterminantSpace>, positions: &[usize]) -> Result<OperatorMatrix> {
        let full = self.to_dense();
        let k = positions.len();
        let m = DMatrix::from_fn(k, k, |i, j| full[(positions[i], positions[j])]);
        Ok(OperatorMatrix {
            space: sub,
            data: MatrixData::Dense(m),
            hermitian_hint: false,
        }
        .with_hint_if_symmetric(self.hermitian_hint))
    }

    pub(crate) fn with_hint_if_symmetric(mut self, wanted: bool) -> Self {
        self.hermitian_hint = wanted && self.max_asymmetry() < 1e-10;
        self
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn collect(space: &Arc<DeterminantSpace>, triplets: Vec<(usize, usize, f64)>, hermitian: bool) -> OperatorMatrix {
    let n = space.len();
    let data = if n <= DENSE_LIMIT {
        let mut m = DMatrix::zeros(n, n);
        for (r, c, v) in triplets {
            m[(r, c)] += v;
        }
        MatrixData::Dense(m)
    } else {
        MatrixData::Sparse(CsrMatrix::from_triplets(n, triplets))
    };
    OperatorMatrix {
        space: space.clone(),
        data,
        hermitian_hint: hermitian,
    }
}

/// Matrix of `e_core + Σ h_pq a†_p a_q + ¼ Σ ⟨pq||rs⟩ a†_p a†_q a_s a_r`
/// in `space`. Contributions leaving the space are dropped, so on a
/// subspace this is the projected operator.
pub fn build_operator_matrix(op: &SpinIntegralSet, space: &Arc<DeterminantSpace>) -> OperatorMatrix {
    let n = op.n_spin;
    let mut one_body: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for q in 0..n {
        for p in 0..n {
            let v = op.h[(p, q)];
            if v != 0.0 {
                one_body[q].push((p, v));
            }
        }
    }
    let two_body = op.two_body_terms();
    let mut triplets = Vec::new();
    for (col, &det) in space.basis().iter().enumerate() {
        if op.e_core != 0.0 {
            triplets.push((col, col, op.e_core));
        }
        for q in det.orbitals() {
            for &(p, v) in &one_body[q] {
                if let Some((sign, out)) =
                    super::apply_string(&[LadderOp::Create(p), LadderOp::Annihilate(q)], det)
                {
                    if let Some(row) = space.position(out) {
                        triplets.push((row, col, sign * v));
                    }
                }
            }
        }
        for ((r, s), terms) in &two_body {
            let Some((s1, mid)) =
                super::apply_string(&[LadderOp::Annihilate(*s), LadderOp::Annihilate(*r)], det)
            else {
                continue;
            };
            for &(p, q, v) in terms {
                if let Some((s2, out)) =
                    super::apply_string(&[LadderOp::Create(p), LadderOp::Create(q)], mid)
                {
                    if let Some(row) = space.position(out) {
                        triplets.push((row, col, s1 * s2 * v));
                    }
                }
            }
        }
    }
    collect(space, triplets, false)
}

/// Hamiltonian matrix; flagged Hermitian after checking it is.
pub fn build_hamiltonian_matrix(s: &SpinIntegralSet, space: &Arc<DeterminantSpace>) -> Result<OperatorMatrix> {
    let m = build_operator_matrix(s, space);
    let asym = m.max_asymmetry();
    if asym >= 1e-10 {
        return Err(Error::NonHermitian(asym));
    }
    Ok(OperatorMatrix {
        hermitian_hint: true,
        ..m
    })
}

/// Precomputed action of a fixed list of excitation operators on a basis:
/// every nonzero `⟨x|E_μ|y⟩` as `(x, y, μ, ±1)`. Re-weighting by amplitudes
/// is then a single pass.
#[derive(Debug, Clone)]
pub struct ExcitationTable {
    dim: usize,
    n_labels: usize,
    entries: Vec<(u32, u32, u32, f64)>,
}

impl ExcitationTable {
    /// Matrix elements whose target leaves `space` are dropped.
    pub fn new(labels: &[ExcitationLabel], space: &DeterminantSpace) -> Result<Self> {
        let mut entries = Vec::new();
        for (mu, label) in labels.iter().enumerate() {
            if label.max_index() >= space.n_spin {
                return Err(Error::Index(format!(
                    "excitation {label} exceeds {} spin orbitals",
                    space.n_spin
                )));
            }
            for (col, det) in space.basis().iter().enumerate() {
                if let Some((sign, out)) = label.excite(*det) {
                    if let Some(row) = space.position(out) {
                        entries.push((row as u32, col as u32, mu as u32, sign));
                    }
                }
            }
        }
        Ok(Self {
            dim: space.len(),
            n_labels: labels.len(),
            entries,
        })
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    /// `Σ_μ t_μ E_μ` as a dense matrix.
    pub fn matrix(&self, amplitudes: &[f64]) -> DMatrix<f64> {
        assert_eq!(amplitudes.len(), self.n_labels);
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, mu, sign) in &self.entries {
            m[(r as usize, c as usize)] += sign * amplitudes[mu as usize];
        }
        m
    }

    /// `(Σ_μ t_μ E_μ) x`.
    pub fn apply(&self, amplitudes: &[f64], x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim);
        for &(r, c, mu, sign) in &self.entries {
            y[r as usize] += sign * amplitudes[mu as usize] * x[c as usize];
        }
        y
    }

    /// `(Σ_μ t_μ E_μ)ᵀ x`.
    pub fn apply_transpose(&self, amplitudes: &[f64], x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim);
        for &(r, c, mu, sign) in &self.entries {
            y[c as usize] += sign * amplitudes[mu as usize] * x[r as usize];
        }
        y
    }
}

/// Matrix of `T = Σ_μ t_μ E_μ` in `space`.
pub fn build_cluster_matrix(t: &ClusterOperator, space: &Arc<DeterminantSpace>) -> Result<OperatorMatrix> {
    let labels = t.labels();
    let table = ExcitationTable::new(&labels, space)?;
    let m = table.matrix(&t.values());
    let n = m.nrows();
    Ok(OperatorMatrix {
        space: space.clone(),
        data: MatrixData::Dense(m),
        hermitian_hint: n == 0 || t.is_empty(),
    })
}

/// Matrix of the de-excitation operator `Λ = Σ_μ λ_μ E_μ†` in `space`.
pub fn build_deexcitation_matrix(lambda: &ClusterOperator, space: &Arc<DeterminantSpace>) -> Result<OperatorMatrix> {
    let t = build_cluster_matrix(lambda, space)?;
    let m = t.into_dense().transpose();
    OperatorMatrix::dense(space.clone(), m, false)
}

/// Matrix of a bare ladder string between two (possibly different) sectors:
/// `out[(x, y)] = ⟨x| ops |y⟩` for `x ∈ target`, `y ∈ source`.
pub fn ladder_matrix(ops: &[LadderOp], source: &DeterminantSpace, target: &DeterminantSpace) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(target.len(), source.len());
    for (col, det) in source.basis().iter().enumerate() {
        if let Some((sign, out)) = super::apply_string(ops, *det) {
            if let Some(row) = target.position(out) {
                m[(row, col)] = sign;
            }
        }
    }
    m
}

/// Unit vector of `det` in `space`.
pub fn basis_vector(space: &DeterminantSpace, det: Determinant) -> Result<DVector<f64>> {
    let pos = space
        .position(det)
        .ok_or_else(|| Error::Index(format!("{det:?} is not in the basis")))?;
    let mut v = DVector::zeros(space.len());
    v[pos] = 1.0;
    Ok(v)
}
