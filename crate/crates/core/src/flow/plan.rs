use std::collections::BTreeMap;

use crate::cc::{manifold, ClusterOperator, ExcitationLabel};
use crate::error::{Error, Result};
use crate::fock::Determinant;
use crate::hamiltonian::ReferencePartition;
use crate::ses::{is_ses, SesAlgebra};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// Descending `Σ_{i∈R} F_ii`; ties by occupied then virtual orbital lists.
    OrbitalEnergy,
    /// Keep the order given.
    Explicit,
}

#[derive(Debug, Clone)]
pub struct FlowPlan {
    pub algebras: Vec<SesAlgebra>,
    pub ordering: Ordering,
    /// Sweeps stop once no pooled amplitude moves by more than this.
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    /// Residual threshold of each local CC solve.
    pub local_tol: f64,
    /// Highest excitation rank kept inside each algebra.
    pub local_rank: usize,
    /// Spin-orbital Fock diagonal used for the local denominators.
    pub orbital_energies: Vec<f64>,
    pub reference: Determinant,
    pub n_spin: usize,
}

impl FlowPlan {
    /// Internal labels of algebra `i`: every excitation of rank at most
    /// `local_rank` that lies inside it.
    pub fn local_manifold(&self, i: usize) -> Vec<ExcitationLabel> {
        local_labels(&self.algebras[i], self.reference, self.n_spin, self.local_rank)
    }

    /// A zero-amplitude pool over the union manifold with owners assigned.
    pub fn empty_pool(&self) -> AmplitudePool {
        let mut owner = BTreeMap::new();
        for i in 0..self.algebras.len() {
            for label in self.local_manifold(i) {
                owner.entry(label).or_insert(i);
            }
        }
        let amplitudes = ClusterOperator::from_pairs(self.reference, owner.keys().map(|l| (l.clone(), 0.0)))
            .expect("labels come from the reference");
        AmplitudePool { amplitudes, owner }
    }
}

fn local_labels(alg: &SesAlgebra, reference: Determinant, n_spin: usize, rank: usize) -> Vec<ExcitationLabel> {
    manifold(reference, n_spin, rank)
        .into_iter()
        .filter(|l| alg.contains_label(l))
        .collect()
}

/// Shared amplitudes and, for each label, the first algebra of the plan
/// that contains it. Only the owner writes a label during a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudePool {
    pub amplitudes: ClusterOperator,
    pub owner: BTreeMap<ExcitationLabel, usize>,
}

fn energy_key(alg: &SesAlgebra, f: &[f64]) -> f64 {
    alg.active_occupied().iter().map(|&i| f[i]).sum()
}

/// Order the algebras and check that each is an SES for its local
/// manifold of rank `local_rank`.
pub fn make_plan(
    algebras: Vec<SesAlgebra>,
    ordering: Ordering,
    partition: &ReferencePartition,
    local_rank: usize,
) -> Result<FlowPlan> {
    let first = algebras
        .first()
        .ok_or_else(|| Error::Usage("a flow needs at least one algebra".into()))?;
    let n_spin = first.n_spin;
    let reference = partition.reference;
    let f = partition.orbital_energies();
    for alg in &algebras {
        if alg.reference != reference || alg.n_spin != n_spin {
            return Err(Error::Usage(format!("algebra {alg} belongs to a different reference")));
        }
        if !is_ses(alg, &local_labels(alg, reference, n_spin, local_rank)) {
            return Err(Error::NotSes(alg.descriptor()));
        }
    }
    let mut algebras = algebras;
    if ordering == Ordering::OrbitalEnergy {
        algebras.sort_by(|a, b| {
            energy_key(b, &f)
                .total_cmp(&energy_key(a, &f))
                .then_with(|| a.active_occupied().cmp(&b.active_occupied()))
                .then_with(|| a.active_virtual().cmp(&b.active_virtual()))
        });
    }
    Ok(FlowPlan {
        algebras,
        ordering,
        sweep_tol: 1e-8,
        max_sweeps: 100,
        local_tol: 1e-10,
        local_rank,
        orbital_energies: f,
        reference,
        n_spin,
    })
}

/// Deduplicated union of the internal labels of every plan algebra, in
/// label order.
pub fn union_manifold(plan: &FlowPlan) -> Vec<ExcitationLabel> {
    plan.empty_pool().owner.into_keys().collect()
}

/// One algebra per pair of occupied spatial orbitals, with every virtual
/// active. Needs a closed-shell reference with at least two occupied
/// spatial orbitals.
pub fn pair_algebras(reference: Determinant, n_spin: usize) -> Result<Vec<SesAlgebra>> {
    let occ = closed_shell_occupied(reference, n_spin)?;
    if occ.len() < 2 {
        return Err(Error::Usage("pair algebras need at least two occupied spatial orbitals".into()));
    }
    let virt: Vec<usize> = (occ.len()..n_spin / 2).collect();
    let mut out = Vec::new();
    for (k, &i) in occ.iter().enumerate() {
        for &j in &occ[k + 1..] {
            out.push(SesAlgebra::spatial(reference, n_spin, &[i, j], &virt)?);
        }
    }
    Ok(out)
}

fn closed_shell_occupied(reference: Determinant, n_spin: usize) -> Result<Vec<usize>> {
    let n_occ = reference.n_electrons() / 2;
    if reference != Determinant::from_orbitals(0..2 * n_occ) || 2 * n_occ > n_spin {
        return Err(Error::Usage(
            "pair manifolds need a closed-shell aufbau reference".into(),
        ));
    }
    Ok((0..n_occ).collect())
}

/// Singles and doubles plus the triples and quadruples whose occupied
/// spin orbitals all belong to one pair of occupied spatial orbitals.
pub fn scsaf_manifold(reference: Determinant, n_spin: usize) -> Result<Vec<ExcitationLabel>> {
    let n_occ = closed_shell_occupied(reference, n_spin)?.len();
    let pair_masks: Vec<u64> = (0..n_occ)
        .flat_map(|i| (i + 1..n_occ).map(move |j| (0b11u64 << (2 * i)) | (0b11u64 << (2 * j))))
        .collect();
    Ok(manifold(reference, n_spin, 4)
        .into_iter()
        .filter(|l| l.rank() <= 2 || pair_masks.iter().any(|&m| l.occupied_mask() & !m == 0))
        .collect())
}
