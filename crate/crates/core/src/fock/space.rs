use std::collections::HashMap;

use super::Determinant;
use crate::error::{Error, Result};

/// An ordered determinant basis of one particle-number sector, optionally
/// restricted to one `M_S`, possibly further restricted to a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantSpace {
    pub n_spin: usize,
    pub n_electrons: usize,
    pub ms2: Option<i32>,
    basis: Vec<Determinant>,
    index: HashMap<Determinant, usize>,
}

impl DeterminantSpace {
    /// Build from an explicit list. The list is sorted and deduplicated.
    pub fn from_basis(
        n_spin: usize,
        n_electrons: usize,
        ms2: Option<i32>,
        mut basis: Vec<Determinant>,
    ) -> Result<Self> {
        if n_spin > 64 {
            return Err(Error::Shape(format!("{n_spin} spin orbitals exceed the 64-bit limit")));
        }
        basis.sort_unstable();
        basis.dedup();
        for d in &basis {
            if d.n_electrons() != n_electrons || ms2.is_some_and(|m| d.ms2() != m) {
                return Err(Error::Shape(format!(
                    "determinant {d:?} does not belong to the ({n_electrons}, {ms2:?}) sector"
                )));
            }
            if n_spin < 64 && d.bits() >> n_spin != 0 {
                return Err(Error::Index(format!("{d:?} exceeds {n_spin} spin orbitals")));
            }
        }
        let index = basis.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        Ok(Self {
            n_spin,
            n_electrons,
            ms2,
            basis,
            index,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    #[inline]
    pub fn basis(&self) -> &[Determinant] {
        &self.basis
    }

    #[inline]
    pub fn get(&self, i: usize) -> Determinant {
        self.basis[i]
    }

    #[inline]
    pub fn position(&self, det: Determinant) -> Option<usize> {
        self.index.get(&det).copied()
    }

    /// The members satisfying `keep`, together with their positions in `self`.
    pub fn subspace(&self, keep: impl Fn(Determinant) -> bool) -> (DeterminantSpace, Vec<usize>) {
        let embedding: Vec<usize> = (0..self.len()).filter(|&i| keep(self.basis[i])).collect();
        let basis: Vec<Determinant> = embedding.iter().map(|&i| self.basis[i]).collect();
        let index = basis.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        (
            DeterminantSpace {
                n_spin: self.n_spin,
                n_electrons: self.n_electrons,
                ms2: self.ms2,
                basis,
                index,
            },
            embedding,
        )
    }
}

/// Next larger integer with the same popcount (Gosper's hack).
fn next_combination(x: u64) -> u64 {
    let c = x & x.wrapping_neg();
    let r = x.wrapping_add(c);
    (((r ^ x) >> 2) / c) | r
}

/// All `C(n_spin, n_electrons)` determinants, filtered by `ms2` when given,
/// in ascending bitset order.
pub fn enumerate_space(
    n_spin: usize,
    n_electrons: usize,
    ms2: Option<i32>,
) -> Result<DeterminantSpace> {
    if n_electrons > n_spin {
        return Err(Error::EmptySpace(format!(
            "{n_electrons} electrons do not fit in {n_spin} spin orbitals"
        )));
    }
    if n_spin > 63 {
        return Err(Error::Shape(format!("{n_spin} spin orbitals exceed the supported limit")));
    }
    let mut basis = Vec::new();
    if n_electrons == 0 {
        basis.push(Determinant::VACUUM);
    } else {
        let limit = 1u64 << n_spin;
        let mut x = (1u64 << n_electrons) - 1;
        while x < limit {
            basis.push(Determinant(x));
            x = next_combination(x);
        }
    }
    if let Some(m) = ms2 {
        basis.retain(|d| d.ms2() == m);
    }
    if basis.is_empty() {
        return Err(Error::EmptySpace(format!(
            "no determinant with {n_electrons} electrons in {n_spin} spin orbitals has MS2={}",
            ms2.unwrap_or(0)
        )));
    }
    DeterminantSpace::from_basis(n_spin, n_electrons, ms2, basis)
}
