//! Hermitian downfolding with the double unitary CC ansatz: the generator
//! `σ_ext = T_ext − T_ext†`, the exact unitary transform, its
//! commutator-truncated approximants, and many-body coefficient export.

mod export;
mod sigma;
mod transform;

pub use export::{extract_many_body, DowncoefExport};
pub use sigma::{build_sigma_ext, SigmaOperator};
pub use transform::{
    commutator_heff, diagonalize_active, ducc_heff_with_sectors, exact_ducc_heff, neighbour_sectors, DuccKind,
    Variant,
};
