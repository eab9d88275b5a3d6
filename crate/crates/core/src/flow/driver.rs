use super::plan::{AmplitudePool, FlowPlan};
use crate::cc::{solve_cc, CcEquations, CcOptions, Denominators, InitialGuess};
use crate::error::{Error, Result};
use crate::fock::OperatorMatrix;
use crate::ses::{build_heff_ses, partition_cluster};

/// One local solve within a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTraceRow {
    pub sweep: usize,
    pub algebra: usize,
    pub descriptor: String,
    /// CC energy of the local problem.
    pub local_energy: f64,
    /// Largest change of an amplitude owned by this algebra.
    pub max_change: f64,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub pool: AmplitudePool,
    /// `⟨Φ|e^{−T} H e^{T}|Φ⟩` with the pooled `T`.
    pub energy: f64,
    pub sweeps: usize,
    pub trace: Vec<FlowTraceRow>,
}

fn with_algebra(err: Error, descriptor: &str) -> Error {
    match err {
        Error::QuasiDegenerate { label, denominator } => Error::QuasiDegenerate {
            label: format!("{label} in algebra {descriptor}"),
            denominator,
        },
        Error::Convergence {
            what,
            iterations,
            residual,
            history,
        } => Error::Convergence {
            what: format!("{what} in algebra {descriptor}"),
            iterations,
            residual,
            history,
        },
        other => other,
    }
}

/// Sweep over the plan until the pool is stationary. `h` is the
/// Hamiltonian on a basis holding every active space of the plan.
pub fn run_flow(h: &OperatorMatrix, plan: &FlowPlan) -> Result<FlowResult> {
    let mut pool = plan.empty_pool();
    let locals: Vec<_> = (0..plan.algebras.len()).map(|i| plan.local_manifold(i)).collect();
    let mut trace = Vec::new();
    let mut changes = Vec::new();
    for sweep in 1..=plan.max_sweeps {
        let mut sweep_change: f64 = 0.0;
        for (i, alg) in plan.algebras.iter().enumerate() {
            let descriptor = alg.descriptor();
            let (t_int, t_ext) = partition_cluster(&pool.amplitudes, alg);
            let heff = build_heff_ses(h, &t_ext, alg)?;
            let opts = CcOptions {
                tol: plan.local_tol,
                initial: InitialGuess::Amplitudes(t_int),
                denominators: Denominators::FockDiagonal(plan.orbital_energies.clone()),
                ..CcOptions::default()
            };
            let local = solve_cc(&heff.matrix, plan.reference, &locals[i], &opts)
                .map_err(|e| with_algebra(e, &descriptor))?;
            let mut change: f64 = 0.0;
            for (label, value) in local.t.iter() {
                if pool.owner.get(label) == Some(&i) {
                    change = change.max((value - pool.amplitudes.get(label)).abs());
                    pool.amplitudes.insert(label.clone(), value)?;
                }
            }
            sweep_change = sweep_change.max(change);
            trace.push(FlowTraceRow {
                sweep,
                algebra: i,
                descriptor,
                local_energy: local.energy + heff.e_shift,
                max_change: change,
            });
        }
        changes.push(sweep_change);
        if sweep_change < plan.sweep_tol {
            let labels = pool.amplitudes.labels();
            let eq = CcEquations::new(h, plan.reference, &labels)?;
            let (energy, _) = eq.evaluate(&pool.amplitudes.values())?;
            return Ok(FlowResult {
                pool,
                energy,
                sweeps: sweep,
                trace,
            });
        }
    }
    Err(Error::Convergence {
        what: "flow sweeps".into(),
        iterations: changes.len(),
        residual: changes.last().copied().unwrap_or(f64::NAN),
        history: changes,
    })
}

/// `max |⟨Φ_μ|e^{−T} H e^{T}|Φ⟩|` over the pool labels, evaluated with the
/// full Hamiltonian.
pub fn flow_residual(h: &OperatorMatrix, pool: &AmplitudePool) -> Result<f64> {
    let labels = pool.amplitudes.labels();
    let eq = CcEquations::new(h, pool.amplitudes.reference, &labels)?;
    let (_, r) = eq.evaluate(&pool.amplitudes.values())?;
    Ok(r.iter().fold(0.0, |m, x| m.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::cc::manifold;
    use crate::flow::{make_plan, pair_algebras, union_manifold, Ordering};
    use crate::fock::{build_hamiltonian_matrix, enumerate_space};
    use crate::hamiltonian::{build_reference_partition, parse_fcidump, to_spin_orbitals, ReferencePartition};
    use crate::ses::SesAlgebra;

    fn setup(text: &str, n: usize) -> (OperatorMatrix, ReferencePartition) {
        let s = to_spin_orbitals(&parse_fcidump(text).unwrap());
        let p = build_reference_partition(&s, n, 0).unwrap();
        let space = Arc::new(enumerate_space(s.n_spin, n, Some(0)).unwrap());
        (build_hamiltonian_matrix(&s, &space).unwrap(), p)
    }

    fn direct(h: &OperatorMatrix, p: &ReferencePartition, labels: &[crate::cc::ExcitationLabel]) -> f64 {
        solve_cc(h, p.reference, labels, &CcOptions::with_fock(p.orbital_energies()))
            .unwrap()
            .energy
    }

    #[test]
    fn one_full_algebra_is_plain_ccsd() {
        let (h, p) = setup(include_str!("../../fixtures/h2_631g.fcidump"), 2);
        let plan = make_plan(vec![SesAlgebra::full(p.reference, 8)], Ordering::Explicit, &p, 2).unwrap();
        let flow = run_flow(&h, &plan).unwrap();
        let e = direct(&h, &p, &manifold(p.reference, 8, 2));
        assert!((flow.energy - e).abs() < 1e-10);
        assert!((flow.energy - -1.151672544960876).abs() < 1e-8);
    }

    #[test]
    fn pair_flow_on_h4_matches_the_direct_union_solve() {
        let (h, p) = setup(include_str!("../../fixtures/h4_sto3g.fcidump"), 4);
        let plan = make_plan(pair_algebras(p.reference, 8).unwrap(), Ordering::OrbitalEnergy, &p, 4).unwrap();
        let flow = run_flow(&h, &plan).unwrap();
        let e = direct(&h, &p, &union_manifold(&plan));
        assert!((flow.energy - e).abs() < 1e-8);
    }

    #[test]
    fn equivalence_on_h6_in_both_orders() {
        let (h, p) = setup(include_str!("../../fixtures/h6_sto3g.fcidump"), 6);
        let algs = pair_algebras(p.reference, 12).unwrap();
        let plan = make_plan(algs.clone(), Ordering::OrbitalEnergy, &p, 4).unwrap();
        let flow = run_flow(&h, &plan).unwrap();
        let e = direct(&h, &p, &union_manifold(&plan));
        assert!((flow.energy - e).abs() < 1e-8, "{} vs {e}", flow.energy);
        assert!(flow_residual(&h, &flow.pool).unwrap() < 10.0 * plan.sweep_tol);
        assert!(flow.sweeps > 1);
        assert_eq!(flow.trace.len(), 3 * flow.sweeps);

        let mut reversed = make_plan(algs.clone(), Ordering::Explicit, &p, 4).unwrap();
        reversed.algebras.reverse();
        let back = run_flow(&h, &reversed).unwrap();
        assert!((back.energy - flow.energy).abs() < 1e-8);

        // A redundant algebra adds no labels and leaves the fixed point alone.
        let inner = SesAlgebra::spatial(p.reference, 12, &[1, 2], &[3, 4]).unwrap();
        let mut more = algs;
        more.push(inner);
        let extended = make_plan(more, Ordering::Explicit, &p, 4).unwrap();
        assert_eq!(union_manifold(&extended), union_manifold(&plan));
        let e2 = run_flow(&h, &extended).unwrap().energy;
        assert!((e2 - flow.energy).abs() < 1e-9);
    }

    #[test]
    fn sweep_limit_reports_history() {
        let (h, p) = setup(include_str!("../../fixtures/h6_sto3g.fcidump"), 6);
        let mut plan = make_plan(pair_algebras(p.reference, 12).unwrap(), Ordering::OrbitalEnergy, &p, 4).unwrap();
        plan.max_sweeps = 1;
        match run_flow(&h, &plan) {
            Err(Error::Convergence { history, .. }) => assert_eq!(history.len(), 1),
            other => panic!("{other:?}"),
        }
    }
}
