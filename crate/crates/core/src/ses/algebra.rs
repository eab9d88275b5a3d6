use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::cc::{ClusterOperator, ExcitationLabel};
use crate::error::{Error, Result};
use crate::fock::{Determinant, DeterminantSpace, ALPHA_MASK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SesMode {
    /// `R` and `S` are unions of whole spatial orbitals (both spins).
    Spatial,
    /// `R` and `S` are arbitrary spin-orbital sets.
    SpinOrbital,
}

/// The excitation sub-algebra generated by `a†_a a_i` with `i ∈ R`
/// (active occupied) and `a ∈ S` (active virtual) around a reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SesAlgebra {
    pub reference: Determinant,
    pub n_spin: usize,
    pub mode: SesMode,
    r_mask: u64,
    s_mask: u64,
}

fn mask_of(orbitals: impl IntoIterator<Item = usize>) -> u64 {
    orbitals.into_iter().fold(0, |m, p| m | (1u64 << p))
}

fn bits(mask: u64) -> Vec<usize> {
    Determinant(mask).orbitals().collect()
}

impl SesAlgebra {
    /// Algebra over explicit spin orbitals.
    pub fn spin_orbital(reference: Determinant, n_spin: usize, occupied: &[usize], virtual_: &[usize]) -> Result<Self> {
        for &p in occupied.iter().chain(virtual_) {
            if p >= n_spin {
                return Err(Error::Index(format!("spin orbital {p} exceeds {n_spin}")));
            }
        }
        let r_mask = mask_of(occupied.iter().copied());
        let s_mask = mask_of(virtual_.iter().copied());
        if r_mask & !reference.bits() != 0 {
            return Err(Error::Usage(format!(
                "active occupied orbitals {:?} are not all occupied in the reference",
                bits(r_mask)
            )));
        }
        if s_mask & reference.bits() != 0 {
            return Err(Error::Usage(format!(
                "active virtual orbitals {:?} are not all empty in the reference",
                bits(s_mask)
            )));
        }
        Ok(Self {
            reference,
            n_spin,
            mode: SesMode::SpinOrbital,
            r_mask,
            s_mask,
        })
    }

    /// Algebra over whole spatial orbitals: spatial orbital `k` contributes
    /// spin orbitals `2k` and `2k+1`.
    pub fn spatial(reference: Determinant, n_spin: usize, occupied: &[usize], virtual_: &[usize]) -> Result<Self> {
        let expand = |s: &[usize]| s.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect::<Vec<_>>();
        let mut alg = Self::spin_orbital(reference, n_spin, &expand(occupied), &expand(virtual_))?;
        alg.mode = SesMode::Spatial;
        Ok(alg)
    }

    /// Every occupied and every virtual orbital active.
    pub fn full(reference: Determinant, n_spin: usize) -> Self {
        let all = if n_spin >= 64 { u64::MAX } else { (1u64 << n_spin) - 1 };
        let r_mask = reference.bits() & all;
        let s_mask = all & !reference.bits();
        let closed = |m: u64| (m & ALPHA_MASK) << 1 == m & !ALPHA_MASK;
        Self {
            reference,
            n_spin,
            mode: if closed(r_mask) && closed(s_mask) {
                SesMode::Spatial
            } else {
                SesMode::SpinOrbital
            },
            r_mask,
            s_mask,
        }
    }

    /// No generators: the active space is the reference alone.
    pub fn empty(reference: Determinant, n_spin: usize) -> Self {
        Self {
            reference,
            n_spin,
            mode: SesMode::Spatial,
            r_mask: 0,
            s_mask: 0,
        }
    }

    pub fn r_mask(&self) -> u64 {
        self.r_mask
    }

    pub fn s_mask(&self) -> u64 {
        self.s_mask
    }

    pub fn active_occupied(&self) -> Vec<usize> {
        bits(self.r_mask)
    }

    pub fn active_virtual(&self) -> Vec<usize> {
        bits(self.s_mask)
    }

    /// `R ∪ S`, ascending.
    pub fn active_orbitals(&self) -> Vec<usize> {
        bits(self.r_mask | self.s_mask)
    }

    pub fn is_full(&self) -> bool {
        (self.r_mask | self.s_mask).count_ones() as usize == self.n_spin
    }

    /// Whether `E_μ` is one of the algebra's generators.
    pub fn contains_label(&self, label: &ExcitationLabel) -> bool {
        label.occupied_mask() & !self.r_mask == 0 && label.virtual_mask() & !self.s_mask == 0
    }

    /// Whether `det` differs from the reference only on active orbitals.
    /// Works in any particle-number sector.
    pub fn contains_determinant(&self, det: Determinant) -> bool {
        (det.bits() ^ self.reference.bits()) & !(self.r_mask | self.s_mask) == 0
    }

    /// Number of active occupied / virtual orbitals, counted in spatial
    /// orbitals in spatial mode and in spin orbitals otherwise.
    pub fn counts(&self) -> (usize, usize) {
        let div = if self.mode == SesMode::Spatial { 2 } else { 1 };
        (
            self.r_mask.count_ones() as usize / div,
            self.s_mask.count_ones() as usize / div,
        )
    }

    /// Compact description such as `R={1} S={2,3}` (spatial indices in
    /// spatial mode, spin-orbital indices otherwise).
    pub fn descriptor(&self) -> String {
        let show = |mask: u64| {
            let items: Vec<String> = match self.mode {
                SesMode::Spatial => bits(mask & ALPHA_MASK).iter().map(|p| (p / 2).to_string()).collect(),
                SesMode::SpinOrbital => bits(mask).iter().map(|p| p.to_string()).collect(),
            };
            format!("{{{}}}", items.join(","))
        };
        let tag = match self.mode {
            SesMode::Spatial => "",
            SesMode::SpinOrbital => " spin-orbital",
        };
        format!("R={} S={}{tag}", show(self.r_mask), show(self.s_mask))
    }

    /// Active-space determinants of the reference's sector other than the
    /// reference itself, as `(removed, added)` spin-orbital sets.
    fn active_excitations(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let r = self.active_occupied();
        let s = self.active_virtual();
        let mut out = Vec::new();
        for a_bits in 1u64..(1u64 << r.len()) {
            let removed: Vec<usize> = (0..r.len()).filter(|k| a_bits >> k & 1 == 1).map(|k| r[k]).collect();
            for b_bits in 1u64..(1u64 << s.len()) {
                if b_bits.count_ones() != a_bits.count_ones() {
                    continue;
                }
                let added: Vec<usize> = (0..s.len()).filter(|k| b_bits >> k & 1 == 1).map(|k| s[k]).collect();
                let d_alpha = added.iter().filter(|p| *p % 2 == 0).count() as i64
                    - removed.iter().filter(|p| *p % 2 == 0).count() as i64;
                if d_alpha == 0 {
                    out.push((removed.clone(), added));
                }
            }
        }
        out
    }
}

impl fmt::Display for SesAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Split `t` into the amplitudes internal to `h` and the rest.
pub fn partition_cluster(t: &ClusterOperator, h: &SesAlgebra) -> (ClusterOperator, ClusterOperator) {
    (t.filter(|l| h.contains_label(l)), t.filter(|l| !h.contains_label(l)))
}

/// Whether the internal part of `manifold` can represent every
/// same-sector active-space determinant: each one must be `E_μ|Φ⟩` for an
/// internal μ of the manifold, so that `e^{T_int}|Φ⟩` carries an
/// independent amplitude on it and spans the full active-space CI.
pub fn is_ses(h: &SesAlgebra, manifold: &[ExcitationLabel]) -> bool {
    let present: HashSet<(u64, u64)> = manifold
        .iter()
        .filter(|l| h.contains_label(l))
        .map(|l| (l.occupied_mask(), l.virtual_mask()))
        .collect();
    h.active_excitations()
        .iter()
        .all(|(removed, added)| present.contains(&(mask_of(removed.iter().copied()), mask_of(added.iter().copied()))))
}

/// `n_o(2^{n_v} − 1) + n_v(2^{n_o} − 1) − n_o·n_v`.
pub fn ses_ccsd_count(n_o: usize, n_v: usize) -> usize {
    n_o * ((1 << n_v) - 1) + n_v * ((1 << n_o) - 1) - n_o * n_v
}

fn spatial_families(occ: &[usize], virt: &[usize]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let subsets = |items: &[usize]| -> Vec<Vec<usize>> {
        (1u64..(1u64 << items.len()))
            .map(|m| (0..items.len()).filter(|k| m >> k & 1 == 1).map(|k| items[k]).collect())
            .collect()
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &i in occ {
        for s in subsets(virt) {
            if seen.insert((vec![i], s.clone())) {
                out.push((vec![i], s));
            }
        }
    }
    for &a in virt {
        for r in subsets(occ) {
            if seen.insert((r.clone(), vec![a])) {
                out.push((r, vec![a]));
            }
        }
    }
    out
}

/// All spatial-mode CCSD embedding algebras (one active occupied orbital
/// with any nonempty virtual set, or one active virtual orbital with any
/// nonempty occupied set) for a closed-shell reference with `n_o` doubly
/// occupied lowest orbitals and `n_v` empty ones above them.
pub fn enumerate_ses_ccsd(n_o: usize, n_v: usize) -> Vec<SesAlgebra> {
    let reference = Determinant::from_orbitals(0..2 * n_o);
    enumerate_ses_ccsd_for(reference, 2 * (n_o + n_v)).expect("closed-shell reference")
}

/// Same as [`enumerate_ses_ccsd`] with occupied and virtual spatial orbitals
/// read off a closed-shell reference.
pub fn enumerate_ses_ccsd_for(reference: Determinant, n_spin: usize) -> Result<Vec<SesAlgebra>> {
    let mut occ = Vec::new();
    let mut virt = Vec::new();
    for k in 0..n_spin / 2 {
        match (reference.is_occupied(2 * k), reference.is_occupied(2 * k + 1)) {
            (true, true) => occ.push(k),
            (false, false) => virt.push(k),
            _ => {
                return Err(Error::Usage(format!(
                    "spatial orbital {k} is singly occupied; spatial algebras need a closed-shell reference"
                )))
            }
        }
    }
    spatial_families(&occ, &virt)
        .into_iter()
        .map(|(r, s)| SesAlgebra::spatial(reference, n_spin, &r, &s))
        .collect()
}

/// The active-space basis of an algebra inside a parent sector, with the
/// positions of its members in the parent basis.
#[derive(Debug, Clone)]
pub struct ActiveProjector {
    pub algebra: SesAlgebra,
    pub space: Arc<DeterminantSpace>,
    pub embedding: Vec<usize>,
}

impl ActiveProjector {
    pub fn new(algebra: &SesAlgebra, parent: &DeterminantSpace) -> Result<Self> {
        let (space, embedding) = parent.subspace(|d| algebra.contains_determinant(d));
        if space.is_empty() {
            return Err(Error::EmptySpace(format!(
                "no determinant of the basis lies in the active space of {algebra}"
            )));
        }
        Ok(Self {
            algebra: algebra.clone(),
            space: Arc::new(space),
            embedding,
        })
    }
}
