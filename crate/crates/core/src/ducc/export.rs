use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fock::{apply_string, Determinant, DeterminantSpace, LadderOp};
use crate::ses::EffectiveHamiltonian;

/// Largest number of active spin orbitals accepted by the fit.
const MAX_ACTIVE: usize = 16;

/// Second-quantized form of a downfolded Hamiltonian over its active spin
/// orbitals, indexed `0..n_active` in the order of `active_orbitals`:
///
/// `e_scalar + Σ h_PQ a†_P a_Q + Σ_{P<Q, R<S} v_PQRS a†_P a†_Q a_S a_R + …`
///
/// so `v_PQRS` is the antisymmetrized integral `⟨PQ||RS⟩`. Phases refer to
/// determinants over active orbitals only, in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct DowncoefExport {
    pub provenance: String,
    pub algebra: String,
    /// Spin-orbital indices of the active orbitals in the parent basis.
    pub active_orbitals: Vec<usize>,
    pub max_rank: usize,
    pub e_scalar: f64,
    pub one_body: Vec<(usize, usize, f64)>,
    pub two_body: Vec<(usize, usize, usize, usize, f64)>,
    /// Terms of rank 3 and above as (created, annihilated, value), both
    /// ascending; the operator is `a†_{c1}…a†_{ck} a_{ak}…a_{a1}`.
    pub higher: Vec<(Vec<usize>, Vec<usize>, f64)>,
    /// `max |recomposed − source|` over every fitted block.
    pub recomposition_error: f64,
    /// Set when the operator basis was linearly dependent on the fitted
    /// blocks and the pseudo-inverse dropped directions.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Term {
    create: Vec<usize>,
    annihilate: Vec<usize>,
}

impl Term {
    fn ladder(&self) -> Vec<LadderOp> {
        self.create
            .iter()
            .map(|&p| LadderOp::Create(p))
            .chain(self.annihilate.iter().rev().map(|&q| LadderOp::Annihilate(q)))
            .collect()
    }

    fn signature(&self) -> (u64, u64) {
        let c = self.create.iter().fold(0u64, |m, p| m | 1 << p);
        let a = self.annihilate.iter().fold(0u64, |m, p| m | 1 << p);
        (c & !a, a & !c)
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u64..(1u64 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// Spin-conserving operator basis up to `max_rank`; `spins[P]` is the spin
/// of compressed orbital `P`.
fn operator_basis(spins: &[usize], max_rank: usize) -> Vec<Term> {
    let n = spins.len();
    let mut out = vec![Term {
        create: vec![],
        annihilate: vec![],
    }];
    for k in 1..=max_rank.min(n) {
        let sets = combinations(n, k);
        for c in &sets {
            let ca = c.iter().filter(|&&p| spins[p] == 0).count();
            for a in &sets {
                if a.iter().filter(|&&p| spins[p] == 0).count() == ca {
                    out.push(Term {
                        create: c.clone(),
                        annihilate: a.clone(),
                    });
                }
            }
        }
    }
    out
}

fn compress(det: Determinant, active: &[usize]) -> u64 {
    active
        .iter()
        .enumerate()
        .fold(0, |m, (k, &p)| if det.is_occupied(p) { m | 1 << k } else { m })
}

fn expand(bits: u64, active: &[usize], inactive: u64) -> u64 {
    active
        .iter()
        .enumerate()
        .fold(inactive, |m, (k, &p)| if bits >> k & 1 == 1 { m | 1 << p } else { m })
}

/// Nonzero `(block, row, col, sign)` of a term on every block.
fn term_entries(term: &Term, blocks: &[(Vec<u64>, HashMap<u64, usize>)]) -> Vec<(usize, usize, usize, f64)> {
    let ops = term.ladder();
    let mut out = Vec::new();
    for (b, (dets, index)) in blocks.iter().enumerate() {
        for (col, &d) in dets.iter().enumerate() {
            if let Some((sign, x)) = apply_string(&ops, Determinant(d)) {
                if let Some(&row) = index.get(&x.bits()) {
                    out.push((b, row, col, sign));
                }
            }
        }
    }
    out.sort_by_key(|x| (x.0, x.1, x.2));
    out
}

fn sparse_dot(a: &[(usize, usize, usize, f64)], b: &[(usize, usize, usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let ka = (a[i].0, a[i].1, a[i].2);
        let kb = (b[j].0, b[j].1, b[j].2);
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].3 * b[j].3;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Least-squares fit of every block of `heff` by an operator of rank
/// `≤ max_rank` under the trace inner product `Tr(AᵀB)`.
///
/// A single particle-number sector does not determine the operator (for
/// instance `N̂` acts as a constant there); the fit is unique when `heff`
/// also carries the neighbouring sectors. Otherwise the minimum-norm
/// solution is returned and `rank_deficient` is set.
pub fn extract_many_body(heff: &EffectiveHamiltonian, max_rank: usize) -> Result<DowncoefExport> {
    let active = heff.algebra.active_orbitals();
    if active.len() > MAX_ACTIVE {
        return Err(Error::Usage(format!(
            "{} active spin orbitals exceed the coefficient-fit limit of {MAX_ACTIVE}",
            active.len()
        )));
    }
    let spins: Vec<usize> = active.iter().map(|p| p % 2).collect();
    let mut blocks = Vec::new();
    let mut sources = Vec::new();
    for m in heff.blocks() {
        let dets: Vec<u64> = m.space().basis().iter().map(|d| compress(*d, &active)).collect();
        let index = dets.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        blocks.push((dets, index));
        sources.push(m.to_dense());
    }

    let terms = operator_basis(&spins, max_rank);
    let mut groups: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, t) in terms.iter().enumerate() {
        groups.entry(t.signature()).or_default().push(i);
    }
    let entries: Vec<_> = terms.iter().map(|t| term_entries(t, &blocks)).collect();
    let mut coef = vec![0.0; terms.len()];
    let mut rank_deficient = false;
    for members in groups.values() {
        let k = members.len();
        let gram = DMatrix::from_fn(k, k, |i, j| sparse_dot(&entries[members[i]], &entries[members[j]]));
        let rhs = DVector::from_fn(k, |i, _| {
            entries[members[i]]
                .iter()
                .map(|&(b, r, c, s)| s * sources[b][(r, c)])
                .sum()
        });
        // The Gram matrix is symmetric positive semidefinite, so its
        // eigendecomposition gives the pseudo-inverse directly.
        let eig = gram.symmetric_eigen();
        let emax = eig.eigenvalues.amax();
        if emax == 0.0 {
            rank_deficient = true;
            continue;
        }
        let cutoff = 1e-10 * emax;
        let mut x = DVector::zeros(k);
        for (l, &e) in eig.eigenvalues.iter().enumerate() {
            if e > cutoff {
                let v = eig.eigenvectors.column(l);
                x += v * (v.dot(&rhs) / e);
            } else {
                rank_deficient = true;
            }
        }
        for (i, &m) in members.iter().enumerate() {
            coef[m] = x[i];
        }
    }

    let mut error: f64 = 0.0;
    let mut recomposed: Vec<DMatrix<f64>> = sources.iter().map(|s| DMatrix::zeros(s.nrows(), s.ncols())).collect();
    for (i, es) in entries.iter().enumerate() {
        for &(b, r, c, s) in es {
            recomposed[b][(r, c)] += coef[i] * s;
        }
    }
    for (r, s) in recomposed.iter().zip(&sources) {
        if !r.is_empty() {
            error = error.max((r - s).amax());
        }
    }

    let mut out = DowncoefExport {
        provenance: heff.provenance.to_string(),
        algebra: heff.algebra.descriptor(),
        active_orbitals: active,
        max_rank,
        e_scalar: 0.0,
        one_body: Vec::new(),
        two_body: Vec::new(),
        higher: Vec::new(),
        recomposition_error: error,
        rank_deficient,
    };
    for (t, &c) in terms.iter().zip(&coef) {
        match t.create.len() {
            0 => out.e_scalar = c + heff.e_shift,
            _ if c.abs() <= 1e-14 => {}
            1 => out.one_body.push((t.create[0], t.annihilate[0], c)),
            2 => out.two_body.push((t.create[0], t.create[1], t.annihilate[0], t.annihilate[1], c)),
            _ => out.higher.push((t.create.clone(), t.annihilate.clone(), c)),
        }
    }
    Ok(out)
}

impl DowncoefExport {
    fn terms(&self) -> Vec<(Term, f64)> {
        let mut out = vec![(
            Term {
                create: vec![],
                annihilate: vec![],
            },
            self.e_scalar,
        )];
        out.extend(self.one_body.iter().map(|&(p, q, v)| {
            (
                Term {
                    create: vec![p],
                    annihilate: vec![q],
                },
                v,
            )
        }));
        out.extend(self.two_body.iter().map(|&(p, q, r, s, v)| {
            (
                Term {
                    create: vec![p, q],
                    annihilate: vec![r, s],
                },
                v,
            )
        }));
        out.extend(self.higher.iter().map(|(c, a, v)| {
            (
                Term {
                    create: c.clone(),
                    annihilate: a.clone(),
                },
                *v,
            )
        }));
        out
    }

    /// Matrix of the exported operator on `space`. Inactive orbitals are
    /// spectators; determinants must agree with each other on them.
    pub fn matrix_on(&self, space: &DeterminantSpace) -> Result<DMatrix<f64>> {
        let active = &self.active_orbitals;
        let active_mask = active.iter().fold(0u64, |m, p| m | 1 << p);
        let n = space.len();
        let mut m = DMatrix::zeros(n, n);
        let terms: Vec<(Vec<LadderOp>, f64)> = self.terms().into_iter().map(|(t, v)| (t.ladder(), v)).collect();
        for (col, det) in space.basis().iter().enumerate() {
            let inactive = det.bits() & !active_mask;
            let c = compress(*det, active);
            for (ops, v) in &terms {
                if let Some((sign, x)) = apply_string(ops, Determinant(c)) {
                    let full = Determinant(expand(x.bits(), active, inactive));
                    if let Some(row) = space.position(full) {
                        m[(row, col)] += sign * v;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Text form: `key = value` header lines, then `one_body` lines
    /// `P Q value`, `two_body` lines `P Q R S value` and, if present,
    /// `many_body` lines `k P1..Pk Q1..Qk value`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(s, "# downfolded Hamiltonian coefficients").unwrap();
        writeln!(s, "provenance = {}", self.provenance).unwrap();
        writeln!(s, "algebra = {}", self.algebra).unwrap();
        writeln!(s, "active_orbitals = {}", list(&self.active_orbitals)).unwrap();
        writeln!(s, "max_rank = {}", self.max_rank).unwrap();
        writeln!(s, "e_scalar = {:.16e}", self.e_scalar).unwrap();
        writeln!(s, "recomposition_error = {:.16e}", self.recomposition_error).unwrap();
        writeln!(s, "rank_deficient = {}", self.rank_deficient).unwrap();
        writeln!(s, "one_body").unwrap();
        for (p, q, v) in &self.one_body {
            writeln!(s, "{p} {q} {v:.16e}").unwrap();
        }
        writeln!(s, "two_body").unwrap();
        for (p, q, r, t, v) in &self.two_body {
            writeln!(s, "{p} {q} {r} {t} {v:.16e}").unwrap();
        }
        if !self.higher.is_empty() {
            writeln!(s, "many_body").unwrap();
            for (c, a, v) in &self.higher {
                writeln!(s, "{} {} {} {v:.16e}", c.len(), list(c), list(a)).unwrap();
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = DowncoefExport {
            provenance: String::new(),
            algebra: String::new(),
            active_orbitals: Vec::new(),
            max_rank: 2,
            e_scalar: 0.0,
            one_body: Vec::new(),
            two_body: Vec::new(),
            higher: Vec::new(),
            recomposition_error: 0.0,
            rank_deficient: false,
        };
        let bad = |n: usize, line: &str| Error::Format(format!("coefficient file line {}: {line:?}", n + 1));
        let num = |n: usize, line: &str, s: &str| s.parse::<f64>().map_err(|_| bad(n, line));
        let idx = |n: usize, line: &str, s: &str| s.parse::<usize>().map_err(|_| bad(n, line));
        let mut section = "";
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if matches!(line, "one_body" | "two_body" | "many_body") {
                section = match line {
                    "one_body" => "one_body",
                    "two_body" => "two_body",
                    _ => "many_body",
                };
                continue;
            }
            if section.is_empty() {
                let (key, value) = line.split_once('=').ok_or_else(|| bad(n, line))?;
                let value = value.trim();
                match key.trim() {
                    "provenance" => out.provenance = value.to_string(),
                    "algebra" => out.algebra = value.to_string(),
                    "active_orbitals" => {
                        out.active_orbitals = value
                            .split_whitespace()
                            .map(|x| idx(n, line, x))
                            .collect::<Result<_>>()?
                    }
                    "max_rank" => out.max_rank = idx(n, line, value)?,
                    "e_scalar" => out.e_scalar = num(n, line, value)?,
                    "recomposition_error" => out.recomposition_error = num(n, line, value)?,
                    "rank_deficient" => {
                        out.rank_deficient = value.parse().map_err(|_| bad(n, line))?;
                    }
                    _ => return Err(bad(n, line)),
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let n_act = out.active_orbitals.len();
            let check = |v: usize| if v < n_act { Ok(v) } else { Err(Error::Index(format!("active index {v} on line {}", n + 1))) };
            match section {
                "one_body" if f.len() == 3 => out.one_body.push((
                    check(idx(n, line, f[0])?)?,
                    check(idx(n, line, f[1])?)?,
                    num(n, line, f[2])?,
                )),
                "two_body" if f.len() == 5 => out.two_body.push((
                    check(idx(n, line, f[0])?)?,
                    check(idx(n, line, f[1])?)?,
                    check(idx(n, line, f[2])?)?,
                    check(idx(n, line, f[3])?)?,
                    num(n, line, f[4])?,
                )),
                "many_body" => {
                    let k = idx(n, line, f.first().ok_or_else(|| bad(n, line))?)?;
                    if f.len() != 2 * k + 2 {
                        return Err(bad(n, line));
                    }
                    let c = f[1..=k].iter().map(|x| idx(n, line, x).and_then(check)).collect::<Result<_>>()?;
                    let a = f[k + 1..=2 * k].iter().map(|x| idx(n, line, x).and_then(check)).collect::<Result<_>>()?;
                    out.higher.push((c, a, num(n, line, f[2 * k + 1])?));
                }
                _ => return Err(bad(n, line)),
            }
        }
        if out.active_orbitals.is_empty() {
            return Err(Error::Format("coefficient file lists no active orbitals".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::cc::ClusterOperator;
    use crate::ducc::{ducc_heff_with_sectors, neighbour_sectors, DuccKind};
    use crate::fock::{build_operator_matrix, enumerate_space, hermitian_eigen, OperatorMatrix};
    use crate::hamiltonian::{build_reference_partition, parse_fcidump, to_spin_orbitals, SpinIntegralSet};
    use crate::ses::{Provenance, SesAlgebra};

    fn h2() -> SpinIntegralSet {
        to_spin_orbitals(&parse_fcidump(include_str!("../../fixtures/h2_sto3g.fcidump")).unwrap())
    }

    fn heff_from(op: &SpinIntegralSet, reference: Determinant, sectors: &[(usize, Option<i32>)]) -> EffectiveHamiltonian {
        let mut blocks: Vec<OperatorMatrix> = sectors
            .iter()
            .map(|&(n, ms)| build_operator_matrix(op, &Arc::new(enumerate_space(op.n_spin, n, ms).unwrap())))
            .collect();
        EffectiveHamiltonian {
            matrix: blocks.remove(0),
            provenance: Provenance::DuccExact,
            algebra: SesAlgebra::full(reference, op.n_spin),
            e_shift: 0.0,
            asymmetry: None,
            sectors: blocks,
        }
    }

    #[test]
    fn bare_hamiltonian_represents_itself() {
        let s = h2();
        let p = build_reference_partition(&s, 2, 0).unwrap();
        let alg = SesAlgebra::full(p.reference, 4);
        let sectors = neighbour_sectors(&alg, 2);
        let heff = ducc_heff_with_sectors(&s, &p, &ClusterOperator::new(p.reference), &alg, DuccKind::Exact, &sectors)
            .unwrap();
        let ex = extract_many_body(&heff, 2).unwrap();
        assert!(ex.recomposition_error < 1e-9);
        assert!(!ex.rank_deficient);
        assert!((ex.e_scalar - s.e_core).abs() < 1e-9);
        for p in 0..4 {
            for q in 0..4 {
                let got = ex.one_body.iter().find(|t| t.0 == p && t.1 == q).map_or(0.0, |t| t.2);
                assert!((got - s.h[(p, q)]).abs() < 1e-9, "h[{p},{q}]");
            }
        }
        for &(p, q, r, t, v) in &ex.two_body {
            assert!((v - s.v(p, q, r, t)).abs() < 1e-9);
        }
        assert_eq!(ex.two_body.iter().filter(|t| t.4.abs() > 1e-9).count(), 
            (0..4).flat_map(|p| (p + 1..4).map(move |q| (p, q)))
                .flat_map(|(p, q)| (0..4).flat_map(move |r| (r + 1..4).map(move |t| (p, q, r, t))))
                .filter(|&(p, q, r, t)| s.v(p, q, r, t).abs() > 1e-9)
                .count());
    }

    #[test]
    fn one_body_input_has_no_two_body_part() {
        let mut h = DMatrix::from_fn(4, 4, |p, q| if p % 2 == q % 2 { 0.1 * (p + q) as f64 - 0.3 } else { 0.0 });
        h = (&h + h.transpose()) * 0.5;
        let op = SpinIntegralSet::new(4, 0.7, h);
        let reference = Determinant::from_orbitals([0, 1]);
        let heff = heff_from(&op, reference, &[(2, Some(0)), (1, Some(1)), (1, Some(-1)), (2, Some(2)), (2, Some(-2)), (3, Some(1)), (3, Some(-1))]);
        let ex = extract_many_body(&heff, 2).unwrap();
        assert!(ex.recomposition_error < 1e-9);
        assert!(ex.two_body.iter().all(|t| t.4.abs() < 1e-9));
    }

    #[test]
    fn single_sector_full_rank_reproduces_the_matrix() {
        let s = h2();
        let reference = Determinant::from_orbitals([0, 1]);
        let heff = heff_from(&s, reference, &[(2, Some(0))]);
        let ex = extract_many_body(&heff, 2).unwrap();
        assert!(ex.recomposition_error < 1e-9, "{}", ex.recomposition_error);
        assert!(ex.rank_deficient);
        let space = enumerate_space(4, 2, Some(0)).unwrap();
        let rebuilt = ex.matrix_on(&space).unwrap();
        assert!((rebuilt - heff.matrix.to_dense()).amax() < 1e-9);
    }

    #[test]
    fn text_round_trip_and_recomposed_spectrum() {
        let s = h2();
        let reference = Determinant::from_orbitals([0, 1]);
        let heff = heff_from(&s, reference, &[(2, Some(0)), (1, Some(1)), (3, Some(1))]);
        let ex = extract_many_body(&heff, 2).unwrap();
        let back = DowncoefExport::parse(&ex.to_text()).unwrap();
        assert_eq!(back, ex);
        let space = enumerate_space(4, 2, Some(0)).unwrap();
        let (a, _) = hermitian_eigen(&back.matrix_on(&space).unwrap());
        let (b, _) = hermitian_eigen(&heff.matrix.to_dense());
        assert!((a[0] - b[0]).abs() <= 10.0 * ex.recomposition_error.max(1e-12) * space.len() as f64);
    }

    #[test]
    fn parse_errors() {
        assert!(DowncoefExport::parse("one_body\n0 0 1.0\n").is_err());
        assert!(DowncoefExport::parse("active_orbitals = 0 1\none_body\n0 5 1.0\n").is_err());
        assert!(DowncoefExport::parse("active_orbitals = 0 1\nbogus = 1\n").is_err());
    }

    #[test]
    fn compression_keeps_core_spectators() {
        let active = [2, 3, 5];
        let d = Determinant::from_orbitals([0, 1, 3, 5]);
        let c = compress(d, &active);
        assert_eq!(c, 0b110);
        assert_eq!(expand(c, &active, 0b11), d.bits());
    }
}
