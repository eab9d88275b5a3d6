//! Coupled-cluster downfolding on an exact determinant-space backend.
//!
//! The crate builds molecular and model Hamiltonians, solves coupled-cluster
//! amplitude and Λ equations by explicit similarity transforms in a
//! determinant basis, and constructs active-space effective Hamiltonians:
//!
//! - [`ses`]: non-Hermitian downfolding over sub-system embedding
//!   sub-algebras, `P e^{-T_ext} H e^{T_ext} P`,
//! - [`ducc`]: Hermitian downfolding with `σ_ext = T_ext − T_ext†`, exact and
//!   commutator-truncated,
//! - [`flow`]: coupled active-space problems sharing one amplitude pool,
//! - [`greens`]: coupled-cluster Green's functions in the `N ± 1` sectors.
//!
//! Everything is checkable against the full-CI matrices in [`fock`].

pub mod cc;
pub mod ducc;
pub mod error;
pub mod flow;
pub mod fock;
pub mod greens;
pub mod hamiltonian;
pub mod ses;

pub use error::{Error, Result};

/// Library version, echoed into run summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
