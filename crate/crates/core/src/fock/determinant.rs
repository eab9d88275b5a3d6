use std::fmt;

/// Mask of the α spin orbitals (even bits) in the interleaved ordering.
pub const ALPHA_MASK: u64 = 0x5555_5555_5555_5555;
/// Mask of the β spin orbitals (odd bits).
pub const BETA_MASK: u64 = !ALPHA_MASK;

/// A Slater determinant as an occupation bitset: bit `p` is set iff spin
/// orbital `p` is occupied. At most 64 spin orbitals.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Determinant(pub u64);

impl Determinant {
    pub const VACUUM: Determinant = Determinant(0);

    pub fn from_orbitals(orbitals: impl IntoIterator<Item = usize>) -> Self {
        Determinant(orbitals.into_iter().fold(0u64, |acc, p| acc | (1u64 << p)))
    }

    #[inline]
    pub fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_occupied(self, p: usize) -> bool {
        self.0 >> p & 1 == 1
    }

    #[inline]
    pub fn n_electrons(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Twice the spin projection, `N_α − N_β`.
    #[inline]
    pub fn ms2(self) -> i32 {
        (self.0 & ALPHA_MASK).count_ones() as i32 - (self.0 & BETA_MASK).count_ones() as i32
    }

    /// Occupied spin orbitals in ascending order.
    pub fn orbitals(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let p = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(p)
            }
        })
    }

    /// Number of occupied orbitals with index strictly below `p`.
    #[inline]
    pub fn count_below(self, p: usize) -> u32 {
        (self.0 & ((1u64 << p) - 1)).count_ones()
    }
}

impl fmt::Debug for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, p) in self.orbitals().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "⟩")
    }
}

/// One elementary ladder operator acting on spin orbital `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderOp {
    Create(usize),
    Annihilate(usize),
}

/// Apply a product of ladder operators to a determinant. The rightmost
/// operator acts first. Each elementary step contributes `(−1)^k`, with `k`
/// the number of occupied orbitals strictly below the acted-on index.
/// Returns `None` when the result vanishes.
pub fn apply_string(ops: &[LadderOp], det: Determinant) -> Option<(f64, Determinant)> {
    let mut bits = det.0;
    let mut odd = false;
    for op in ops.iter().rev() {
        match *op {
            LadderOp::Create(p) => {
                let mask = 1u64 << p;
                if bits & mask != 0 {
                    return None;
                }
                odd ^= (bits & (mask - 1)).count_ones() & 1 == 1;
                bits |= mask;
            }
            LadderOp::Annihilate(p) => {
                let mask = 1u64 << p;
                if bits & mask == 0 {
                    return None;
                }
                odd ^= (bits & (mask - 1)).count_ones() & 1 == 1;
                bits &= !mask;
            }
        }
    }
    Some((if odd { -1.0 } else { 1.0 }, Determinant(bits)))
}

/// `a†_p a_q`, the most common string.
#[inline]
pub fn apply_excitation(p: usize, q: usize, det: Determinant) -> Option<(f64, Determinant)> {
    apply_string(&[LadderOp::Create(p), LadderOp::Annihilate(q)], det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use LadderOp::*;

    #[test]
    fn simple_hop() {
        let d = Determinant::from_orbitals([0]);
        assert_eq!(
            apply_string(&[Create(1), Annihilate(0)], d),
            Some((1.0, Determinant::from_orbitals([1])))
        );
    }

    #[test]
    fn annihilating_empty_or_creating_filled_vanishes() {
        assert_eq!(apply_string(&[Annihilate(0)], Determinant::VACUUM), None);
        assert_eq!(apply_string(&[Create(0)], Determinant::from_orbitals([0])), None);
    }

    #[test]
    fn number_operators_are_diagonal_with_unit_phase() {
        let d = Determinant::from_orbitals([0, 1]);
        assert_eq!(apply_string(&[Create(0), Annihilate(0)], d), Some((1.0, d)));
        assert_eq!(apply_string(&[Create(1), Annihilate(1)], d), Some((1.0, d)));
    }

    /// Coefficient of |occ⟩ in an explicitly antisymmetrized ordered product
    /// `a†_{o1} a†_{o2} ...|0⟩` written in the canonical ascending order:
    /// the parity of the permutation that sorts the creation sequence.
    fn sort_parity(seq: &[usize]) -> f64 {
        let mut inversions = 0;
        for i in 0..seq.len() {
            for j in i + 1..seq.len() {
                if seq[i] > seq[j] {
                    inversions += 1;
                }
            }
        }
        if inversions % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    #[test]
    fn phases_match_explicit_antisymmetrization() {
        // a†_p a_q acting on a†_{o1}...a†_{ok}|0⟩ (ascending) equals the
        // sequence with o_q replaced by p in place; sorting parity gives the sign.
        for bits in 0u64..(1 << 5) {
            let det = Determinant(bits);
            if det.n_electrons() > 3 {
                continue;
            }
            let occ: Vec<usize> = det.orbitals().collect();
            for q in 0..5 {
                for p in 0..5 {
                    let got = apply_excitation(p, q, det);
                    let Some(pos) = occ.iter().position(|&o| o == q) else {
                        assert_eq!(got, None);
                        continue;
                    };
                    let mut seq = occ.clone();
                    seq[pos] = p;
                    if p != q && occ.contains(&p) {
                        assert_eq!(got, None);
                        continue;
                    }
                    let expected = Determinant::from_orbitals(seq.iter().copied());
                    assert_eq!(got, Some((sort_parity(&seq), expected)), "p={p} q={q} {det:?}");
                }
            }
        }
    }

    #[test]
    fn spin_bookkeeping() {
        let d = Determinant::from_orbitals([0, 1, 2]);
        assert_eq!(d.ms2(), 1);
        assert_eq!(d.n_electrons(), 3);
        assert_eq!(d.count_below(2), 2);
    }
}
