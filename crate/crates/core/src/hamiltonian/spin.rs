use nalgebra::DMatrix;

use super::IntegralSet;

/// Spin of spin orbital `p`: 0 for α, 1 for β. Orbitals are interleaved,
/// `p = 2·spatial + spin`.
#[inline]
pub fn spin_of(p: usize) -> usize {
    p & 1
}

/// A number-conserving operator of rank ≤ 2 over spin orbitals,
///
/// `e_core + Σ h_pq a†_p a_q + ¼ Σ ⟨pq||rs⟩ a†_p a†_q a_s a_r`.
///
/// This is the shape of the molecular Hamiltonian, but the same type also
/// carries the normal-ordered pieces `F_N` and `V_N` and model Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinIntegralSet {
    pub n_spin: usize,
    pub e_core: f64,
    pub h: DMatrix<f64>,
    /// Dense `⟨pq||rs⟩`, row-major; empty when the operator has no two-body part.
    v_anti: Vec<f64>,
}

impl SpinIntegralSet {
    pub fn new(n_spin: usize, e_core: f64, h: DMatrix<f64>) -> Self {
        assert_eq!(h.shape(), (n_spin, n_spin), "one-body block has the wrong shape");
        Self {
            n_spin,
            e_core,
            h,
            v_anti: Vec::new(),
        }
    }

    pub fn with_two_body(mut self, v_anti: Vec<f64>) -> Self {
        let n = self.n_spin;
        assert_eq!(v_anti.len(), n * n * n * n, "two-body block has the wrong length");
        self.v_anti = v_anti;
        self
    }

    pub fn has_two_body(&self) -> bool {
        !self.v_anti.is_empty()
    }

    /// `⟨pq||rs⟩` (physicists' notation, antisymmetrized).
    #[inline]
    pub fn v(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        if self.v_anti.is_empty() {
            return 0.0;
        }
        let n = self.n_spin;
        self.v_anti[((p * n + q) * n + r) * n + s]
    }

    /// Set `⟨pq||rs⟩` together with its antisymmetric and Hermitian partners.
    pub fn set_v(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let n = self.n_spin;
        if self.v_anti.is_empty() {
            self.v_anti = vec![0.0; n * n * n * n];
        }
        let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
        for (a, b, c, d, sign) in [
            (p, q, r, s, 1.0),
            (q, p, r, s, -1.0),
            (p, q, s, r, -1.0),
            (q, p, s, r, 1.0),
            (r, s, p, q, 1.0),
            (s, r, p, q, -1.0),
            (r, s, q, p, -1.0),
            (s, r, q, p, 1.0),
        ] {
            self.v_anti[idx(a, b, c, d)] = sign * value;
        }
    }

    pub fn two_body_dense(&self) -> &[f64] {
        &self.v_anti
    }

    /// Nonzero `⟨pq||rs⟩` with `p < q`, `r < s`, grouped by the annihilated
    /// pair `(r, s)`. Used by the determinant-space matrix builders.
    pub fn two_body_terms(&self) -> Vec<((usize, usize), Vec<(usize, usize, f64)>)> {
        let n = self.n_spin;
        let mut out = Vec::new();
        if self.v_anti.is_empty() {
            return out;
        }
        for r in 0..n {
            for s in r + 1..n {
                let mut terms = Vec::new();
                for p in 0..n {
                    for q in p + 1..n {
                        let value = self.v(p, q, r, s);
                        if value != 0.0 {
                            terms.push((p, q, value));
                        }
                    }
                }
                if !terms.is_empty() {
                    out.push(((r, s), terms));
                }
            }
        }
        out
    }

    /// `self + other`, termwise.
    pub fn add(&self, other: &SpinIntegralSet) -> SpinIntegralSet {
        assert_eq!(self.n_spin, other.n_spin);
        let v_anti = match (self.v_anti.is_empty(), other.v_anti.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.v_anti.clone(),
            (true, false) => other.v_anti.clone(),
            (false, false) => self
                .v_anti
                .iter()
                .zip(&other.v_anti)
                .map(|(a, b)| a + b)
                .collect(),
        };
        SpinIntegralSet {
            n_spin: self.n_spin,
            e_core: self.e_core + other.e_core,
            h: &self.h + &other.h,
            v_anti,
        }
    }
}

/// Expand spatial integrals into interleaved spin orbitals with
/// `⟨pq||rs⟩ = (pr|qs)·δ(σp,σr)δ(σq,σs) − (ps|qr)·δ(σp,σs)δ(σq,σr)`.
pub fn to_spin_orbitals(s: &IntegralSet) -> SpinIntegralSet {
    let n = 2 * s.n_spatial;
    let mut h = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            if spin_of(p) == spin_of(q) {
                h[(p, q)] = s.h(p / 2, q / 2);
            }
        }
    }
    let mut v = vec![0.0; n * n * n * n];
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for t in 0..n {
                    let mut value = 0.0;
                    if spin_of(p) == spin_of(r) && spin_of(q) == spin_of(t) {
                        value += s.eri(p / 2, r / 2, q / 2, t / 2);
                    }
                    if spin_of(p) == spin_of(t) && spin_of(q) == spin_of(r) {
                        value -= s.eri(p / 2, t / 2, q / 2, r / 2);
                    }
                    v[((p * n + q) * n + r) * n + t] = value;
                }
            }
        }
    }
    SpinIntegralSet::new(n, s.e_core, h).with_two_body(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::parse_fcidump;

    fn fixture() -> IntegralSet {
        parse_fcidump(include_str!("../../fixtures/h4_sto3g.fcidump")).unwrap()
    }

    #[test]
    fn single_orbital_hubbard_like_term() {
        let u = 0.8;
        let mut set = IntegralSet::zeros(1, 2, 0).unwrap();
        set.set_eri(0, 0, 0, 0, u);
        let spin = to_spin_orbitals(&set);
        assert_eq!(spin.v(0, 1, 0, 1), u);
        assert_eq!(spin.v(0, 1, 1, 0), -u);
    }

    #[test]
    fn pauli_and_same_spin_exchange() {
        let set = fixture();
        let spin = to_spin_orbitals(&set);
        let n = spin.n_spin;
        for p in 0..n {
            for r in 0..n {
                for s in 0..n {
                    assert_eq!(spin.v(p, p, r, s), 0.0);
                }
            }
        }
        // p = 0α, q = 1α (spin orbitals 0 and 2)
        let expected = set.eri(0, 0, 1, 1) - set.eri(0, 1, 1, 0);
        assert!((spin.v(0, 2, 0, 2) - expected).abs() < 1e-15);
    }

    #[test]
    fn antisymmetry_hermiticity_and_spin_conservation() {
        let spin = to_spin_orbitals(&fixture());
        let n = spin.n_spin;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = spin.v(p, q, r, s);
                        assert_eq!(v, -spin.v(q, p, r, s));
                        assert_eq!(v, -spin.v(p, q, s, r));
                        assert!((v - spin.v(r, s, p, q)).abs() < 1e-14);
                        let conserving = (spin_of(p) + spin_of(q)) == (spin_of(r) + spin_of(s))
                            && ((spin_of(p) == spin_of(r) && spin_of(q) == spin_of(s))
                                || (spin_of(p) == spin_of(s) && spin_of(q) == spin_of(r)));
                        if !conserving {
                            assert_eq!(v, 0.0);
                        }
                    }
                }
            }
            for q in 0..n {
                if spin_of(p) != spin_of(q) {
                    assert_eq!(spin.h[(p, q)], 0.0);
                }
                assert_eq!(spin.h[(p, q)], spin.h[(q, p)]);
            }
        }
    }

    #[test]
    fn set_v_fills_partners() {
        let mut op = SpinIntegralSet::new(4, 0.0, DMatrix::zeros(4, 4));
        op.set_v(0, 1, 2, 3, 0.3);
        assert_eq!(op.v(1, 0, 2, 3), -0.3);
        assert_eq!(op.v(2, 3, 0, 1), 0.3);
        assert_eq!(op.v(3, 2, 0, 1), -0.3);
        let terms = op.two_body_terms();
        assert_eq!(terms.len(), 2);
    }
}
