//! Determinant-space realization of second-quantized operators.

mod determinant;
mod eigen;
mod expm;
mod matrix;
mod space;

pub use determinant::{apply_excitation, apply_string, Determinant, LadderOp, ALPHA_MASK, BETA_MASK};
pub use eigen::{
    ground_state, ground_state_with, hermitian_eigen, right_eigenpairs, EigenMethod, RightEigenpair,
};
pub use expm::{
    exp_antihermitian, exp_antihermitian_apply, exp_antihermitian_dense, exp_nilpotent, exp_nilpotent_dense, exp_series,
    similarity_transform, TransformMode,
};
pub use matrix::{
    basis_vector, build_cluster_matrix, build_deexcitation_matrix, build_hamiltonian_matrix,
    build_operator_matrix, ladder_matrix, max_asymmetry, CsrMatrix, ExcitationTable, MatrixData,
    OperatorMatrix, DENSE_LIMIT,
};
pub use space::{enumerate_space, DeterminantSpace};
