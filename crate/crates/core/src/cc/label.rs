use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::fock::{Determinant, LadderOp, ALPHA_MASK};

/// An excitation `i₁…i_k → a₁…a_k` relative to a reference determinant.
///
/// Its operator is `a†_{a₁} ⋯ a†_{a_k} a_{i_k} ⋯ a_{i₁}`. Labels order by
/// rank first, then lexicographically by occupied and virtual indices.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExcitationLabel {
    occupied: Vec<usize>,
    virtual_: Vec<usize>,
}

impl ExcitationLabel {
    pub fn new(mut occupied: Vec<usize>, mut virtual_: Vec<usize>) -> Result<Self> {
        occupied.sort_unstable();
        virtual_.sort_unstable();
        let dup = |v: &[usize]| v.windows(2).any(|w| w[0] == w[1]);
        if occupied.is_empty()
            || occupied.len() != virtual_.len()
            || dup(&occupied)
            || dup(&virtual_)
            || occupied.iter().any(|i| virtual_.contains(i))
        {
            return Err(Error::Usage(format!(
                "invalid excitation {occupied:?} -> {virtual_:?}"
            )));
        }
        Ok(Self { occupied, virtual_ })
    }

    pub fn single(i: usize, a: usize) -> Self {
        Self::new(vec![i], vec![a]).expect("valid single excitation")
    }

    pub fn double(i: usize, j: usize, a: usize, b: usize) -> Self {
        Self::new(vec![i, j], vec![a, b]).expect("valid double excitation")
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.occupied.len()
    }

    #[inline]
    pub fn occupied(&self) -> &[usize] {
        &self.occupied
    }

    #[inline]
    pub fn virtual_orbitals(&self) -> &[usize] {
        &self.virtual_
    }

    pub fn occupied_mask(&self) -> u64 {
        self.occupied.iter().fold(0, |m, &i| m | 1 << i)
    }

    pub fn virtual_mask(&self) -> u64 {
        self.virtual_.iter().fold(0, |m, &a| m | 1 << a)
    }

    pub fn max_index(&self) -> usize {
        self.occupied
            .iter()
            .chain(&self.virtual_)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// The ladder-operator string of the excitation, rightmost acting first.
    pub fn ladder_string(&self) -> Vec<LadderOp> {
        let mut ops: Vec<LadderOp> = self.virtual_.iter().map(|&a| LadderOp::Create(a)).collect();
        ops.extend(self.occupied.iter().rev().map(|&i| LadderOp::Annihilate(i)));
        ops
    }

    /// Act with the excitation operator on `det`.
    #[inline]
    pub fn excite(&self, det: Determinant) -> Option<(f64, Determinant)> {
        let mut bits = det.bits();
        let mut odd = false;
        for &i in &self.occupied {
            let mask = 1u64 << i;
            if bits & mask == 0 {
                return None;
            }
            odd ^= (bits & (mask - 1)).count_ones() & 1 == 1;
            bits &= !mask;
        }
        for &a in self.virtual_.iter().rev() {
            let mask = 1u64 << a;
            if bits & mask != 0 {
                return None;
            }
            odd ^= (bits & (mask - 1)).count_ones() & 1 == 1;
            bits |= mask;
        }
        Some((if odd { -1.0 } else { 1.0 }, Determinant(bits)))
    }

    /// Whether the label is a valid excitation out of `reference`.
    pub fn fits_reference(&self, reference: Determinant) -> bool {
        let r = reference.bits();
        self.occupied_mask() & !r == 0 && self.virtual_mask() & r == 0
    }

    /// Change of `2·M_S` produced by the excitation.
    pub fn delta_ms2(&self) -> i32 {
        let alpha = |m: u64| (m & ALPHA_MASK).count_ones() as i32;
        let rank = self.rank() as i32;
        let (ov, vv) = (alpha(self.occupied_mask()), alpha(self.virtual_mask()));
        // Each α moved in adds +1 to N_α−N_β; each β moved in adds −1.
        (2 * vv - rank) - (2 * ov - rank)
    }
}

impl Ord for ExcitationLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank()
            .cmp(&other.rank())
            .then_with(|| self.occupied.cmp(&other.occupied))
            .then_with(|| self.virtual_.cmp(&other.virtual_))
    }
}

impl PartialOrd for ExcitationLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExcitationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{}->{}", join(&self.occupied), join(&self.virtual_))
    }
}

impl fmt::Debug for ExcitationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Cluster amplitudes keyed by excitation label. Λ is stored with the same
/// structure; its labels then name de-excitations `(E_μ)†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOperator {
    pub reference: Determinant,
    amplitudes: BTreeMap<ExcitationLabel, f64>,
}

impl ClusterOperator {
    pub fn new(reference: Determinant) -> Self {
        Self {
            reference,
            amplitudes: BTreeMap::new(),
        }
    }

    pub fn from_pairs(
        reference: Determinant,
        pairs: impl IntoIterator<Item = (ExcitationLabel, f64)>,
    ) -> Result<Self> {
        let mut op = Self::new(reference);
        for (label, value) in pairs {
            op.insert(label, value)?;
        }
        Ok(op)
    }

    pub fn insert(&mut self, label: ExcitationLabel, value: f64) -> Result<()> {
        if !label.fits_reference(self.reference) {
            return Err(Error::Usage(format!(
                "excitation {label} is not an excitation out of {:?}",
                self.reference
            )));
        }
        self.amplitudes.insert(label, value);
        Ok(())
    }

    pub fn get(&self, label: &ExcitationLabel) -> f64 {
        self.amplitudes.get(label).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ExcitationLabel, f64)> {
        self.amplitudes.iter().map(|(l, v)| (l, *v))
    }

    pub fn labels(&self) -> Vec<ExcitationLabel> {
        self.amplitudes.keys().cloned().collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.amplitudes.values().copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.amplitudes.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            reference: self.reference,
            amplitudes: self.amplitudes.iter().map(|(l, v)| (l.clone(), v * factor)).collect(),
        }
    }

    /// Union of two operators; amplitudes present in both are summed.
    pub fn merge(&self, other: &ClusterOperator) -> Self {
        let mut out = self.clone();
        for (label, value) in other.iter() {
            *out.amplitudes.entry(label.clone()).or_insert(0.0) += value;
        }
        out
    }

    /// Keep the amplitudes whose labels satisfy `keep`.
    pub fn filter(&self, keep: impl Fn(&ExcitationLabel) -> bool) -> Self {
        Self {
            reference: self.reference,
            amplitudes: self
                .amplitudes
                .iter()
                .filter(|(l, _)| keep(l))
                .map(|(l, v)| (l.clone(), *v))
                .collect(),
        }
    }
}

fn subsets(items: &[usize], k: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut Vec::new(), out);
}

/// Every `M_S`-conserving excitation out of `reference` of rank `1..=max_rank`.
pub fn manifold(reference: Determinant, n_spin: usize, max_rank: usize) -> Vec<ExcitationLabel> {
    let occ: Vec<usize> = reference.orbitals().filter(|&p| p < n_spin).collect();
    let virt: Vec<usize> = (0..n_spin).filter(|&p| !reference.is_occupied(p)).collect();
    let mut out = Vec::new();
    for rank in 1..=max_rank.min(occ.len()).min(virt.len()) {
        let (mut os, mut vs) = (Vec::new(), Vec::new());
        subsets(&occ, rank, &mut os);
        subsets(&virt, rank, &mut vs);
        for o in &os {
            for v in &vs {
                let label = ExcitationLabel {
                    occupied: o.clone(),
                    virtual_: v.clone(),
                };
                if label.delta_ms2() == 0 {
                    out.push(label);
                }
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_string, enumerate_space};

    #[test]
    fn excite_matches_ladder_string() {
        let reference = Determinant::from_orbitals([0, 1, 2, 3]);
        for label in manifold(reference, 8, 4) {
            for det in enumerate_space(8, 4, None).unwrap().basis() {
                assert_eq!(label.excite(*det), apply_string(&label.ladder_string(), *det));
            }
        }
    }

    #[test]
    fn manifold_counts_against_determinant_differences() {
        // 2 electrons in 4 spin orbitals: one α and one β occupied.
        let reference = Determinant::from_orbitals([0, 1]);
        let labels = manifold(reference, 4, 2);
        let singles = labels.iter().filter(|l| l.rank() == 1).count();
        let doubles = labels.iter().filter(|l| l.rank() == 2).count();
        assert_eq!((singles, doubles), (2, 1));
        // Brute force: same-M_S determinants differing by ≤ 2 substitutions.
        let reachable = enumerate_space(4, 2, Some(0))
            .unwrap()
            .basis()
            .iter()
            .filter(|d| **d != reference)
            .filter(|d| ((d.bits() ^ reference.bits()).count_ones() / 2) <= 2)
            .count();
        assert_eq!(labels.len(), reachable);
    }

    #[test]
    fn full_rank_manifold_is_ci_complete() {
        let reference = Determinant::from_orbitals([0, 1, 2, 3]);
        let labels = manifold(reference, 8, 4);
        let sector = enumerate_space(8, 4, Some(0)).unwrap();
        assert_eq!(labels.len(), sector.len() - 1);
        let mut targets: Vec<u64> = labels
            .iter()
            .map(|l| l.excite(reference).unwrap().1.bits())
            .collect();
        targets.sort();
        targets.dedup();
        assert_eq!(targets.len(), labels.len());
    }

    #[test]
    fn no_virtuals_means_empty_manifold() {
        let reference = Determinant::from_orbitals([0, 1]);
        assert!(manifold(reference, 2, 1).is_empty());
    }

    #[test]
    fn ordering_is_rank_first() {
        let reference = Determinant::from_orbitals([0, 1]);
        let labels = manifold(reference, 6, 2);
        assert!(labels.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(labels[0].rank(), 1);
    }

    #[test]
    fn invalid_labels_rejected() {
        assert!(ExcitationLabel::new(vec![0], vec![0]).is_err());
        assert!(ExcitationLabel::new(vec![0, 1], vec![2]).is_err());
        let mut t = ClusterOperator::new(Determinant::from_orbitals([0, 1]));
        assert!(t.insert(ExcitationLabel::single(2, 3), 0.1).is_err());
    }
}
