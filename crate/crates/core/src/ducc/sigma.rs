use std::sync::Arc;

use crate::cc::ClusterOperator;
use crate::error::{Error, Result};
use crate::fock::{build_cluster_matrix, DeterminantSpace, OperatorMatrix};
use crate::ses::SesAlgebra;

/// Anti-Hermitian generator `σ = T − T†` together with the `T` it came from.
#[derive(Debug, Clone)]
pub struct SigmaOperator {
    pub generator: ClusterOperator,
    pub matrix: OperatorMatrix,
}

impl SigmaOperator {
    /// The same generator realized on another determinant basis.
    pub fn on_space(&self, space: &Arc<DeterminantSpace>) -> Result<SigmaOperator> {
        let t = build_cluster_matrix(&self.generator, space)?.into_dense();
        Ok(SigmaOperator {
            generator: self.generator.clone(),
            matrix: OperatorMatrix::dense(space.clone(), &t - t.transpose(), false)?,
        })
    }

    pub fn scaled(&self, factor: f64) -> SigmaOperator {
        let m = self.matrix.to_dense() * factor;
        SigmaOperator {
            generator: self.generator.scaled(factor),
            matrix: OperatorMatrix::dense(self.matrix.space().clone(), m, false).expect("same shape"),
        }
    }
}

/// `σ_ext = T_ext − T_ext†` on `space`. Every amplitude must be external to `h`.
pub fn build_sigma_ext(t_ext: &ClusterOperator, h: &SesAlgebra, space: &Arc<DeterminantSpace>) -> Result<SigmaOperator> {
    if let Some((label, _)) = t_ext.iter().find(|(l, _)| h.contains_label(l)) {
        return Err(Error::Contamination(format!(
            "amplitude {label} is internal to {h} and cannot enter σ_ext"
        )));
    }
    let generator = t_ext.clone();
    let t = build_cluster_matrix(&generator, space)?.into_dense();
    Ok(SigmaOperator {
        generator,
        matrix: OperatorMatrix::dense(space.clone(), &t - t.transpose(), false)?,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::cc::{manifold, ExcitationLabel};
    use crate::fock::{enumerate_space, exp_antihermitian_dense, Determinant};

    #[test]
    fn zero_and_antihermitian() {
        let reference = Determinant::from_orbitals(0..4);
        let space = Arc::new(enumerate_space(8, 4, Some(0)).unwrap());
        let alg = SesAlgebra::spatial(reference, 8, &[1], &[2]).unwrap();
        let zero = build_sigma_ext(&ClusterOperator::new(reference), &alg, &space).unwrap();
        assert_eq!(zero.matrix.to_dense().amax(), 0.0);

        let labels: Vec<_> = manifold(reference, 8, 2).into_iter().filter(|l| !alg.contains_label(l)).collect();
        let t = ClusterOperator::from_pairs(
            reference,
            labels.into_iter().enumerate().map(|(k, l)| (l, 0.01 * (k as f64 - 5.0))),
        )
        .unwrap();
        let sigma = build_sigma_ext(&t, &alg, &space).unwrap();
        let m = sigma.matrix.to_dense();
        assert!((&m + m.transpose()).amax() < 1e-12);
    }

    #[test]
    fn contamination() {
        let reference = Determinant::from_orbitals(0..2);
        let space = Arc::new(enumerate_space(4, 2, Some(0)).unwrap());
        let alg = SesAlgebra::full(reference, 4);
        let t = ClusterOperator::from_pairs(reference, [(ExcitationLabel::single(0, 2), 0.1)]).unwrap();
        assert!(matches!(build_sigma_ext(&t, &alg, &space), Err(Error::Contamination(_))));
    }

    #[test]
    fn single_amplitude_is_a_givens_rotation() {
        let reference = Determinant::from_orbitals([0]);
        let space = Arc::new(enumerate_space(4, 1, Some(1)).unwrap());
        let theta = 0.3;
        let t = ClusterOperator::from_pairs(reference, [(ExcitationLabel::single(0, 2), theta)]).unwrap();
        let sigma = build_sigma_ext(&t, &SesAlgebra::empty(reference, 4), &space).unwrap();
        let u = exp_antihermitian_dense(&sigma.matrix.to_dense()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        assert!((u - expected).amax() < 1e-14);
    }
}
