use std::fmt::Write as _;
use std::sync::Arc;

use ccdownfold::cc::{manifold, solve_cc, solve_lambda, CcOptions, CcResult};
use ccdownfold::ducc::{
    diagonalize_active, ducc_heff_with_sectors, extract_many_body, neighbour_sectors, DuccKind,
};
use ccdownfold::flow::{flow_residual, make_plan, pair_algebras, run_flow, scsaf_manifold, Ordering};
use ccdownfold::fock::{build_hamiltonian_matrix, enumerate_space, ground_state, hermitian_eigen, OperatorMatrix};
use ccdownfold::greens::{
    ducc_gfcc, find_peaks, find_peaks_in, gfcc, FrequencyGrid, GfOptions, GreensResult, PEAK_FLOOR,
};
use ccdownfold::hamiltonian::{
    build_reference_partition, model_pairing, read_fcidump, to_spin_orbitals, ReferencePartition, SpinIntegralSet,
};
use ccdownfold::ses::{enumerate_ses_ccsd_for, is_ses, partition_cluster, ses_report, SesAlgebra};
use ccdownfold::{Error, Result};
use serde_json::{json, Value};

use crate::config::{RunConfig, Source, Workflow};
use crate::report::{fmt_hartree, fmt_small, hartree, raw, Outcome};

/// Integrals, reference and the N-electron Hamiltonian matrix.
pub struct Problem {
    pub ham: SpinIntegralSet,
    pub partition: ReferencePartition,
    pub h: OperatorMatrix,
}

impl Problem {
    pub fn load(source: &Source) -> Result<Self> {
        let (ham, n, ms2) = match source {
            Source::Fcidump(path) => {
                let ints = read_fcidump(path).map_err(|e| match e {
                    Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
                    other => other,
                })?;
                (to_spin_orbitals(&ints), ints.n_electrons, ints.ms2)
            }
            Source::Pairing {
                levels,
                spacing,
                g,
                n_electrons,
            } => (model_pairing(*levels, *spacing, *g), *n_electrons, (*n_electrons % 2) as i32),
        };
        let partition = build_reference_partition(&ham, n, ms2)?;
        let space = Arc::new(enumerate_space(ham.n_spin, n, Some(ms2))?);
        let h = build_hamiltonian_matrix(&ham, &space)?;
        Ok(Self { ham, partition, h })
    }

    fn n_electrons(&self) -> usize {
        self.partition.reference.n_electrons()
    }

    fn cc(&self, rank: usize, tol: f64) -> Result<CcResult> {
        let labels = manifold(self.partition.reference, self.ham.n_spin, rank);
        let opts = CcOptions {
            tol,
            ..CcOptions::with_fock(self.partition.orbital_energies())
        };
        solve_cc(&self.h, self.partition.reference, &labels, &opts)
    }

    fn algebra(&self, cfg: &RunConfig) -> Result<Option<SesAlgebra>> {
        match (&cfg.active_occ, &cfg.active_virt) {
            (Some(occ), Some(virt)) => {
                let n_spatial = self.ham.n_spin / 2;
                if let Some(k) = occ.iter().chain(virt).find(|&&k| k >= n_spatial) {
                    return Err(Error::Index(format!(
                        "active orbital {k} out of range ({n_spatial} spatial orbitals)"
                    )));
                }
                Ok(Some(SesAlgebra::spatial(
                    self.partition.reference,
                    self.ham.n_spin,
                    occ,
                    virt,
                )?))
            }
            _ => Ok(None),
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let problem = Problem::load(&cfg.source)?;
    let mut out = Outcome::default();
    out.set("n_spin_orbitals", problem.ham.n_spin);
    out.set("n_electrons", problem.n_electrons());
    out.set("determinants", problem.h.dim());
    out.set("e_ref", hartree(problem.partition.e_ref));
    match cfg.workflow {
        Workflow::Ccsd => ccsd(&problem, cfg, &mut out)?,
        Workflow::VerifySes => verify_ses(&problem, cfg, &mut out)?,
        Workflow::Downfold => downfold(&problem, cfg, &mut out)?,
        Workflow::Flow => flow(&problem, cfg, &mut out)?,
        Workflow::Gf => gf(&problem, cfg, &mut out)?,
    }
    Ok(out)
}

fn ccsd(p: &Problem, cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let rank = cfg.rank.unwrap_or(2);
    let cc = p.cc(rank, cfg.tol)?;
    let (e_fci, _) = ground_state(&p.h)?;
    let e_ref = p.partition.e_ref;
    out.set("rank", rank);
    out.set("e_cc", hartree(cc.energy));
    out.set("e_corr", hartree(cc.energy - e_ref));
    out.set("e_fci", hartree(e_fci));
    out.set("cc_minus_fci", raw(cc.energy - e_fci));
    out.set("iterations", cc.iterations);
    out.set("residual", raw(cc.residual_norm));
    let mut csv = String::from("quantity,value\n");
    for (k, v) in [
        ("e_ref", e_ref),
        ("e_cc", cc.energy),
        ("e_corr", cc.energy - e_ref),
        ("e_fci", e_fci),
    ] {
        writeln!(csv, "{k},{}", fmt_hartree(v)).unwrap();
    }
    out.file("energies.csv", csv);
    Ok(())
}

fn verify_ses(p: &Problem, cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let rank = cfg.rank.unwrap_or(2);
    let cc = p.cc(rank, cfg.tol)?;
    let algebras = match p.algebra(cfg)? {
        Some(alg) => {
            let labels = manifold(p.partition.reference, p.ham.n_spin, rank);
            if !is_ses(&alg, &labels) {
                return Err(Error::NotSes(alg.descriptor()));
            }
            vec![alg]
        }
        None => enumerate_ses_ccsd_for(p.partition.reference, p.ham.n_spin)?,
    };
    let rows = ses_report(&p.h, &cc, &algebras)?;
    let mut csv = String::from("algebra,active_dim,residual,eigenvalue,delta_e\n");
    let mut max_residual: f64 = 0.0;
    let mut max_delta: f64 = 0.0;
    for r in &rows {
        writeln!(
            csv,
            "\"{}\",{},{},{},{}",
            r.algebra,
            r.active_dim,
            fmt_small(r.residual),
            fmt_hartree(r.eigenvalue),
            fmt_small(r.delta_e)
        )
        .unwrap();
        max_residual = max_residual.max(r.residual);
        max_delta = max_delta.max(r.delta_e);
    }
    out.set("rank", rank);
    out.set("e_cc", hartree(cc.energy));
    out.set("algebras", rows.len());
    out.set("max_residual", raw(max_residual));
    out.set("max_delta_e", raw(max_delta));
    out.file("ses_table.csv", csv);
    Ok(())
}

fn downfold(p: &Problem, cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let alg = p.algebra(cfg)?.expect("validated active lists");
    let rank = cfg.rank.unwrap_or(2);
    let cc = p.cc(rank, cfg.tol)?;
    let (e_fci, _) = ground_state(&p.h)?;
    let (_, t_ext) = partition_cluster(&cc.t, &alg);
    let sectors = neighbour_sectors(&alg, p.n_electrons());
    let build = |kind| ducc_heff_with_sectors(&p.ham, &p.partition, &t_ext, &alg, kind, &sectors);

    let exact = build(DuccKind::Exact)?;
    let e_exact = diagonalize_active(&exact)?.0[0];
    let mut csv = String::from(
        "variant,energy,error_vs_exact,error_vs_fci,asymmetry,recomposition_error,recomposed_energy\n",
    );
    writeln!(csv, "exact,{},0,{},,,", fmt_hartree(e_exact), fmt_small(e_exact - e_fci)).unwrap();
    let mut rows = Vec::new();
    let mut last_export = None;
    for &v in &cfg.variants {
        let heff = build(DuccKind::Approximant(v))?;
        let energy = diagonalize_active(&heff)?.0[0];
        let export = extract_many_body(&heff, cfg.max_rank)?;
        let (spectrum, _) = hermitian_eigen(&export.matrix_on(heff.matrix.space())?);
        let recomposed = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
        let asymmetry = heff.asymmetry.unwrap_or(0.0);
        writeln!(
            csv,
            "{v},{},{},{},{},{},{}",
            fmt_hartree(energy),
            fmt_small(energy - e_exact),
            fmt_small(energy - e_fci),
            fmt_small(asymmetry),
            fmt_small(export.recomposition_error),
            fmt_hartree(recomposed)
        )
        .unwrap();
        rows.push(json!({
            "variant": v.to_string(),
            "energy": hartree(energy),
            "error_vs_exact": raw(energy - e_exact),
            "error_vs_fci": raw(energy - e_fci),
            "asymmetry": raw(asymmetry),
            "recomposition_error": raw(export.recomposition_error),
            "recomposed_energy": hartree(recomposed),
            "rank_deficient": export.rank_deficient,
        }));
        out.file(&format!("downfolded_{v}.coef"), export.to_text());
        last_export = Some(export);
    }
    if let Some(export) = last_export {
        out.file("downfolded.coef", export.to_text());
    }
    out.set("algebra", alg.descriptor());
    out.set("active_dim", exact.dim());
    out.set("e_cc", hartree(cc.energy));
    out.set("e_fci", hartree(e_fci));
    out.set("e_exact_transform", hartree(e_exact));
    out.set("variants", Value::Array(rows));
    out.file("downfold_energies.csv", csv);
    Ok(())
}

fn flow(p: &Problem, cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    if cfg.active_occ.is_some() {
        out.warnings
            .push("flow uses the occupied-pair algebras; --active-occ/--active-virt are ignored".into());
    }
    let reference = p.partition.reference;
    let local_rank = cfg.rank.unwrap_or(4);
    let mut plan = make_plan(
        pair_algebras(reference, p.ham.n_spin)?,
        Ordering::OrbitalEnergy,
        &p.partition,
        local_rank,
    )?;
    plan.local_tol = cfg.tol;
    let result = run_flow(&p.h, &plan)?;
    let residual = flow_residual(&p.h, &result.pool)?;
    let direct_labels = scsaf_manifold(reference, p.ham.n_spin)?;
    let direct = solve_cc(
        &p.h,
        reference,
        &direct_labels,
        &CcOptions {
            tol: cfg.tol,
            ..CcOptions::with_fock(p.partition.orbital_energies())
        },
    )?;
    let mut csv = String::from("sweep,algebra,descriptor,local_energy,max_change\n");
    for r in &result.trace {
        writeln!(
            csv,
            "{},{},\"{}\",{},{}",
            r.sweep,
            r.algebra,
            r.descriptor,
            fmt_hartree(r.local_energy),
            fmt_small(r.max_change)
        )
        .unwrap();
    }
    out.set("algebras", plan.algebras.len());
    out.set("local_rank", local_rank);
    out.set("sweeps", result.sweeps);
    out.set("e_flow", hartree(result.energy));
    out.set("e_direct", hartree(direct.energy));
    out.set("delta_e", raw(result.energy - direct.energy));
    out.set("union_residual", raw(residual));
    out.set("direct_manifold_size", direct_labels.len());
    out.file("flow_trace.csv", csv);
    Ok(())
}

fn peaks_csv(r: &GreensResult) -> (String, Vec<Value>) {
    let mut csv = String::from("omega,height\n");
    let mut rows = Vec::new();
    for pk in find_peaks(r) {
        writeln!(csv, "{},{}", fmt_hartree(pk.omega), fmt_hartree(pk.height)).unwrap();
        rows.push(json!({"omega": hartree(pk.omega), "height": hartree(pk.height)}));
    }
    (csv, rows)
}

/// Highest-frequency peak of the removal part, i.e. minus the first
/// ionization energy.
fn first_removal_peak(r: &GreensResult) -> Option<f64> {
    find_peaks_in(&r.grid.points(), &r.spectral_removal, PEAK_FLOOR)
        .last()
        .map(|pk| pk.omega)
}

fn gf(p: &Problem, cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let (lo, hi, n, eta) = cfg.omega.expect("validated grid");
    let grid = FrequencyGrid::new(lo, hi, n, eta)?;
    let rank = cfg.rank.unwrap_or(2);
    let cc = p.cc(rank, cfg.tol)?;
    let labels = manifold(p.partition.reference, p.ham.n_spin, rank);
    let lambda = solve_lambda(&p.h, &cc.t, &labels, cfg.tol.max(1e-10))?;
    let opts = GfOptions {
        components: cfg.components,
        cc_rank: rank,
        cc_tol: cfg.tol,
        ..GfOptions::default()
    };
    let pairs: Vec<(usize, usize)> = (0..p.ham.n_spin).map(|q| (q, q)).collect();
    let full = gfcc(&p.ham, &cc.t, &lambda, &pairs, &grid, &opts)?;
    let (peaks, peak_rows) = peaks_csv(&full);
    out.set("e_cc", hartree(cc.energy));
    out.set("grid_spacing", hartree(grid.spacing()));
    out.set("peaks", Value::Array(peak_rows));
    out.set("first_removal_peak", first_removal_peak(&full).map(hartree));
    out.file("spectrum.csv", full.to_csv());
    out.file("peaks.csv", peaks);

    if let Some(alg) = p.algebra(cfg)? {
        let kind = if cfg.settings.contains_key("variant") {
            DuccKind::Approximant(cfg.variants[0])
        } else {
            DuccKind::Exact
        };
        let (_, t_ext) = partition_cluster(&cc.t, &alg);
        let gamma = ducc_heff_with_sectors(
            &p.ham,
            &p.partition,
            &t_ext,
            &alg,
            kind,
            &neighbour_sectors(&alg, p.n_electrons()),
        )?;
        let active: Vec<(usize, usize)> = alg.active_orbitals().into_iter().map(|q| (q, q)).collect();
        let r = ducc_gfcc(&gamma, &active, &grid, &opts)?;
        let (peaks, peak_rows) = peaks_csv(&r);
        out.set("active_algebra", alg.descriptor());
        out.set(
            "active_hamiltonian",
            match kind {
                DuccKind::Exact => "exact".to_string(),
                DuccKind::Approximant(v) => v.to_string(),
            },
        );
        out.set("active_peaks", Value::Array(peak_rows));
        out.set("active_first_removal_peak", first_removal_peak(&r).map(hartree));
        out.file("spectrum_active.csv", r.to_csv());
        out.file("peaks_active.csv", peaks);
    }
    Ok(())
}

