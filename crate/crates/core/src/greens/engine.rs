use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};

use super::FrequencyGrid;
use crate::cc::{left_vector, manifold, solve_cc, solve_lambda, CcEquations, CcOptions, ClusterOperator, ExcitationLabel};
use crate::error::{Error, Result};
use crate::fock::{
    apply_string, build_hamiltonian_matrix, enumerate_space, exp_series, hermitian_eigen, Determinant,
    DeterminantSpace, ExcitationTable, LadderOp, OperatorMatrix,
};
use crate::hamiltonian::SpinIntegralSet;
use crate::ses::EffectiveHamiltonian;

type C64 = Complex<f64>;

/// Which parts of the time-ordered Green's function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    Both,
    /// `(N−1)`-sector term only (ionization peaks).
    Removal,
    /// `(N+1)`-sector term only (attachment peaks).
    Addition,
}

impl Components {
    fn removal(self) -> bool {
        self != Components::Addition
    }

    fn addition(self) -> bool {
        self != Components::Removal
    }
}

/// How the shifted sector problems are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfSolver {
    /// Dense complex LU of `ω ± (H̄ − E) ∓ iη` at every frequency, with
    /// `H̄ = e^{−T} H e^{T}` formed on the sector.
    Direct,
    /// Eigen-decomposition of the symmetric sector Hamiltonian once; the
    /// similarity transform is then applied to the source vectors.
    Spectral,
    /// `Direct` for sectors up to [`GfOptions::direct_limit`] and for
    /// non-symmetric blocks, `Spectral` otherwise.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfOptions {
    pub components: Components,
    pub solver: GfSolver,
    pub direct_limit: usize,
    /// Excitation rank of the active-space CC solve in [`ducc_gfcc`].
    pub cc_rank: usize,
    pub cc_tol: f64,
}

impl Default for GfOptions {
    fn default() -> Self {
        Self {
            components: Components::Both,
            solver: GfSolver::Auto,
            direct_limit: 150,
            cc_rank: 2,
            cc_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GreensResult {
    pub grid: FrequencyGrid,
    pub pairs: Vec<(usize, usize)>,
    /// `g[k][i]` is `G_pq(ω_i)` for `pairs[k]`.
    pub g: Vec<Vec<C64>>,
    /// `(1/π) Σ_p Im G^rem_pp(ω)` over the diagonal pairs.
    pub spectral_removal: Vec<f64>,
    /// `−(1/π) Σ_p Im G^add_pp(ω)` over the diagonal pairs.
    pub spectral_addition: Vec<f64>,
    /// Sum of the two.
    pub spectral: Vec<f64>,
}

impl GreensResult {
    pub(crate) fn new(grid: FrequencyGrid, pairs: &[(usize, usize)]) -> Self {
        let n = grid.n_points;
        Self {
            grid,
            pairs: pairs.to_vec(),
            g: vec![vec![C64::new(0.0, 0.0); n]; pairs.len()],
            spectral_removal: vec![0.0; n],
            spectral_addition: vec![0.0; n],
            spectral: vec![0.0; n],
        }
    }

    /// Add a removal or addition contribution to pair `k`.
    pub(crate) fn accumulate(&mut self, k: usize, removal: bool, values: &[C64]) {
        let (p, q) = self.pairs[k];
        for (i, v) in values.iter().enumerate() {
            self.g[k][i] += v;
            if p == q {
                let a = v.im / PI;
                if removal {
                    self.spectral_removal[i] += a;
                    self.spectral[i] += a;
                } else {
                    self.spectral_addition[i] -= a;
                    self.spectral[i] -= a;
                }
            }
        }
    }

    /// Plot-ready CSV: `omega`, real and imaginary parts per pair, then
    /// `A(omega)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("omega");
        for (p, q) in &self.pairs {
            write!(s, ",re_g_{p}_{q},im_g_{p}_{q}").unwrap();
        }
        s.push_str(",a_omega\n");
        for (i, w) in self.grid.points().iter().enumerate() {
            write!(s, "{w:.10}").unwrap();
            for g in &self.g {
                write!(s, ",{:.10},{:.10}", g[i].re, g[i].im).unwrap();
            }
            writeln!(s, ",{:.10}", self.spectral[i]).unwrap();
        }
        s
    }
}

fn spin_sign(p: usize) -> i32 {
    if p % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `op · v` taken from `from` into `to`.
fn move_vector(op: LadderOp, v: &DVector<f64>, from: &DeterminantSpace, to: &DeterminantSpace) -> DVector<f64> {
    let mut out = DVector::zeros(to.len());
    for (col, det) in from.basis().iter().enumerate() {
        if v[col] == 0.0 {
            continue;
        }
        if let Some((sign, x)) = apply_string(&[op], *det) {
            if let Some(row) = to.position(x) {
                out[row] += sign * v[col];
            }
        }
    }
    out
}

/// Shared state of one Green's-function evaluation: `e^{T}|Φ⟩` and
/// `⟨Φ|(1+Λ)e^{−T}` on the N-electron block.
struct Engine<'a> {
    n_space: &'a DeterminantSpace,
    labels: Vec<ExcitationLabel>,
    amps: Vec<f64>,
    ket: DVector<f64>,
    bra: DVector<f64>,
    energy: f64,
    opts: &'a GfOptions,
}

/// `e^{±T}` or `e^{±Tᵀ}` on one sector.
struct SectorCluster {
    table: ExcitationTable,
    amps: Vec<f64>,
    max_power: usize,
}

impl SectorCluster {
    fn exp(&self, v: &DVector<f64>, sign: f64, transpose: bool) -> Result<DVector<f64>> {
        if transpose {
            exp_series(|x| self.table.apply_transpose(&self.amps, x) * sign, v, self.max_power)
        } else {
            exp_series(|x| self.table.apply(&self.amps, x) * sign, v, self.max_power)
        }
    }
}

enum Resolvent {
    Direct(DMatrix<f64>),
    Spectral(Vec<f64>, DMatrix<f64>),
}

impl<'a> Engine<'a> {
    fn new(
        n_block: &'a OperatorMatrix,
        reference: Determinant,
        t: &ClusterOperator,
        lambda: &ClusterOperator,
        opts: &'a GfOptions,
    ) -> Result<Self> {
        let labels = t.labels();
        let amps = t.values();
        let eq = CcEquations::new(n_block, reference, &labels)?;
        let ket = eq.wavefunction(&amps)?;
        let (energy, _) = eq.evaluate(&amps)?;
        let bra = eq.exp_minus_t_transpose(&amps, &left_vector(n_block, reference, lambda)?)?;
        Ok(Self {
            n_space: n_block.space(),
            labels,
            amps,
            ket,
            bra,
            energy,
            opts,
        })
    }

    /// Add the removal (`removal = true`) or addition term of every pair
    /// whose orbitals have spin `spin` and map the reference sector into
    /// `sector`.
    fn sector_term(
        &self,
        sector: &OperatorMatrix,
        removal: bool,
        spin: i32,
        result: &mut GreensResult,
    ) -> Result<()> {
        let space = sector.space();
        let pairs: Vec<(usize, (usize, usize))> = result
            .pairs
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, (p, q))| spin_sign(*p) == spin && spin_sign(*q) == spin)
            .collect();
        if pairs.is_empty() {
            return Ok(());
        }
        // Removal: source a_p|R⟩, left a_q|L⟩. Addition: source a†_q|R⟩,
        // left a†_p|L⟩.
        let (src_op, left_op): (fn(usize) -> LadderOp, fn(usize) -> LadderOp) = if removal {
            (LadderOp::Annihilate, LadderOp::Annihilate)
        } else {
            (LadderOp::Create, LadderOp::Create)
        };
        let sources: Vec<DVector<f64>> = pairs
            .iter()
            .map(|(_, (p, q))| move_vector(src_op(if removal { *p } else { *q }), &self.ket, self.n_space, space))
            .collect();
        let lefts: Vec<DVector<f64>> = pairs
            .iter()
            .map(|(_, (p, q))| move_vector(left_op(if removal { *q } else { *p }), &self.bra, self.n_space, space))
            .collect();
        let cluster = SectorCluster {
            table: ExcitationTable::new(&self.labels, space)?,
            amps: self.amps.clone(),
            max_power: space.n_electrons + 2,
        };
        let symmetric = sector.max_asymmetry() < 1e-10;
        let use_direct = match self.opts.solver {
            GfSolver::Direct => true,
            GfSolver::Spectral => {
                if !symmetric {
                    return Err(Error::NonHermitian(sector.max_asymmetry()));
                }
                false
            }
            GfSolver::Auto => !symmetric || space.len() <= self.opts.direct_limit,
        };
        let resolvent = if use_direct {
            let hd = sector.to_dense();
            let n = space.len();
            let mut hbar = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                let col = cluster.exp(&(&hd * cluster.exp(&e, 1.0, false)?), -1.0, false)?;
                hbar.set_column(j, &col);
            }
            Resolvent::Direct(hbar)
        } else {
            let (e, u) = hermitian_eigen(&sector.to_dense());
            Resolvent::Spectral(e, u)
        };
        let grid = result.grid;
        let omegas = grid.points();
        let e0 = self.energy;
        // Removal: (ω + H − E − iη)^{-1}; addition: (ω − H + E + iη)^{-1}.
        let (h_sign, shift) = if removal {
            (1.0, C64::new(-e0, -grid.eta))
        } else {
            (-1.0, C64::new(e0, grid.eta))
        };
        match resolvent {
            Resolvent::Direct(hbar) => {
                let b: Vec<DVector<f64>> = sources.iter().map(|s| cluster.exp(s, -1.0, false)).collect::<Result<_>>()?;
                let l: Vec<DVector<f64>> = lefts.iter().map(|s| cluster.exp(s, 1.0, true)).collect::<Result<_>>()?;
                let n = hbar.nrows();
                let mut values = vec![vec![C64::new(0.0, 0.0); omegas.len()]; pairs.len()];
                for (i, &w) in omegas.iter().enumerate() {
                    let mut m: DMatrix<C64> = hbar.map(|x| C64::new(h_sign * x, 0.0));
                    for d in 0..n {
                        m[(d, d)] += C64::new(w, 0.0) + shift;
                    }
                    let lu = m.lu();
                    for (k, (bk, lk)) in b.iter().zip(&l).enumerate() {
                        let rhs = bk.map(|x| C64::new(x, 0.0));
                        let x = lu.solve(&rhs).ok_or_else(|| {
                            let u = lu.u();
                            let diag: Vec<f64> = (0..n).map(|d| u[(d, d)].norm()).collect();
                            let hi = diag.iter().cloned().fold(0.0, f64::max);
                            let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
                            Error::LinearSolve(format!(
                                "shifted sector problem at omega = {w:.6} is singular (pivot ratio {:.3e})",
                                hi / lo
                            ))
                        })?;
                        values[k][i] = lk.iter().zip(x.iter()).map(|(a, b)| b * *a).sum();
                    }
                }
                for ((k, _), v) in pairs.iter().zip(&values) {
                    result.accumulate(*k, removal, v);
                }
            }
            Resolvent::Spectral(e, u) => {
                for ((k, _), (s, l)) in pairs.iter().zip(sources.iter().zip(&lefts)) {
                    let c = u.tr_mul(s);
                    let f = u.tr_mul(l);
                    let values: Vec<C64> = omegas
                        .iter()
                        .map(|&w| {
                            (0..e.len())
                                .map(|j| C64::new(f[j] * c[j], 0.0) / (C64::new(w + h_sign * e[j], 0.0) + shift))
                                .sum()
                        })
                        .collect();
                    result.accumulate(*k, removal, &values);
                }
            }
        }
        Ok(())
    }

    /// Evaluate every requested component; `sector(n, ms2)` supplies the
    /// Hamiltonian block of a neighbouring sector, or `None` if the sector
    /// holds no determinants.
    fn run(
        &self,
        pairs: &[(usize, usize)],
        grid: &FrequencyGrid,
        sector: impl Fn(usize, i32) -> Result<Option<Arc<OperatorMatrix>>>,
    ) -> Result<GreensResult> {
        let mut result = GreensResult::new(*grid, pairs);
        let n = self.n_space.n_electrons;
        let ms2 = self.n_space.ms2.unwrap_or(0);
        for spin in [1, -1] {
            if !pairs.iter().any(|(p, q)| spin_sign(*p) == spin && spin_sign(*q) == spin) {
                continue;
            }
            if self.opts.components.removal() && n > 0 {
                if let Some(block) = sector(n - 1, ms2 - spin)? {
                    self.sector_term(&block, true, spin, &mut result)?;
                }
            }
            if self.opts.components.addition() {
                if let Some(block) = sector(n + 1, ms2 + spin)? {
                    self.sector_term(&block, false, spin, &mut result)?;
                }
            }
        }
        Ok(result)
    }
}

fn check_pairs(pairs: &[(usize, usize)], n_spin: usize) -> Result<()> {
    if let Some((p, q)) = pairs.iter().find(|(p, q)| *p >= n_spin || *q >= n_spin) {
        return Err(Error::Index(format!("orbital pair ({p}, {q}) exceeds {n_spin} spin orbitals")));
    }
    Ok(())
}

/// Full-space Green's function `G_pq(ω)` from converged `T` and `Λ` on the
/// sector of `t.reference`.
pub fn gfcc(
    ham: &SpinIntegralSet,
    t: &ClusterOperator,
    lambda: &ClusterOperator,
    pairs: &[(usize, usize)],
    grid: &FrequencyGrid,
    opts: &GfOptions,
) -> Result<GreensResult> {
    check_pairs(pairs, ham.n_spin)?;
    let reference = t.reference;
    let n = reference.n_electrons();
    let space = Arc::new(enumerate_space(ham.n_spin, n, Some(reference.ms2()))?);
    let n_block = build_hamiltonian_matrix(ham, &space)?;
    let engine = Engine::new(&n_block, reference, t, lambda, opts)?;
    engine.run(pairs, grid, |n, ms2| match enumerate_space(ham.n_spin, n, Some(ms2)) {
        Ok(s) => Ok(Some(Arc::new(build_hamiltonian_matrix(ham, &Arc::new(s))?))),
        Err(Error::EmptySpace(_)) => Ok(None),
        Err(e) => Err(e),
    })
}

/// Green's function of an active-space Hamiltonian `Γ`: CC and Λ are
/// solved on `Γ` itself (rank `opts.cc_rank`), then the `N ± 1` blocks
/// carried by `gamma` play the role of `H`.
pub fn ducc_gfcc(
    gamma: &EffectiveHamiltonian,
    pairs: &[(usize, usize)],
    grid: &FrequencyGrid,
    opts: &GfOptions,
) -> Result<GreensResult> {
    let alg = &gamma.algebra;
    check_pairs(pairs, alg.n_spin)?;
    let active = alg.r_mask() | alg.s_mask();
    if let Some((p, q)) = pairs.iter().find(|(p, q)| active >> p & 1 == 0 || active >> q & 1 == 0) {
        return Err(Error::Usage(format!("orbital pair ({p}, {q}) is not active in {alg}")));
    }
    if alg.reference.bits() & !active != 0 {
        return Err(Error::Usage(format!(
            "the active-space Green's function needs every occupied orbital active, not {alg}"
        )));
    }
    let reference = alg.reference;
    let labels: Vec<ExcitationLabel> = manifold(reference, alg.n_spin, opts.cc_rank)
        .into_iter()
        .filter(|l| alg.contains_label(l))
        .collect();
    let cc_opts = CcOptions {
        tol: opts.cc_tol,
        ..CcOptions::default()
    };
    let cc = solve_cc(&gamma.matrix, reference, &labels, &cc_opts)?;
    let lambda = solve_lambda(&gamma.matrix, &cc.t, &labels, opts.cc_tol)?;
    let engine = Engine::new(&gamma.matrix, reference, &cc.t, &lambda, opts)?;
    engine.run(pairs, grid, |n, ms2| {
        gamma
            .sector(n, Some(ms2))
            .map(|m| Some(Arc::new(m.clone())))
            .ok_or_else(|| {
                Error::Usage(format!(
                    "the effective Hamiltonian carries no ({n}, MS2={ms2}) sector; build it with its neighbour sectors"
                ))
            })
    })
}
