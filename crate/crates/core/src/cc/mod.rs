//! Coupled-cluster amplitude and Λ equations solved through the exact
//! determinant-space similarity transform.

mod label;
mod lambda;
mod solver;

pub use label::{manifold, ClusterOperator, ExcitationLabel};
pub use lambda::{left_vector, solve_lambda};
pub use solver::{solve_cc, CcEquations, CcOptions, CcResult, Denominators, InitialGuess};
