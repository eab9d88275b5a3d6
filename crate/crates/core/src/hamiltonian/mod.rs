//! Integral input and the normal-ordered partitioning of the Hamiltonian.

mod fcidump;
mod pairing;
mod reference;
mod spin;

pub use fcidump::{parse_fcidump, read_fcidump, IntegralSet};
pub use pairing::model_pairing;
pub use reference::{build_reference_partition, ReferencePartition};
pub use spin::{spin_of, to_spin_orbitals, SpinIntegralSet};
