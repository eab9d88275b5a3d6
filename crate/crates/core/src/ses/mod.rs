//! Sub-system embedding sub-algebras and the non-Hermitian effective
//! Hamiltonians built from them.

mod algebra;
mod heff;

pub use algebra::{
    enumerate_ses_ccsd, enumerate_ses_ccsd_for, is_ses, partition_cluster, ses_ccsd_count, ActiveProjector,
    SesAlgebra, SesMode,
};
pub use heff::{
    build_heff_ses, cc_root, ses_report, verify_ses_theorem, EffectiveHamiltonian, Provenance, SesReportRow,
};
