//! Subcommand implementations. Each writes its outputs into a directory and
//! returns the list of files written.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use ldm_core::bregman::{
    solve_finite_t_banded, solve_finite_t_dense, solve_zero_t_banded, solve_zero_t_dense, IterRecord, SolverConfig,
    Termination,
};
use ldm_core::dense::{eig_sym, fermi_dirac_from_spectrum, projector_from_spectrum, DenseMatrix};
use ldm_core::energy::{evaluate_projected, EnergyBreakdown};
use ldm_core::io::{load_dense, save_dense};
use ldm_core::metrics::{
    check_thm1, check_thm2, compare, scaling_study, BoundCheck, ComparisonRecord, ScalingOptions, ScalingTable,
    ScalingTarget,
};

use crate::config::{RunConfig, SolverKind};
use crate::manifest::{content_hash, RunManifest};

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, written: &mut Vec<String>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(dir.join(name), text + "\n").with_context(|| format!("writing {name}"))?;
    written.push(name.to_string());
    Ok(())
}

pub fn write_text(dir: &Path, name: &str, text: &str, written: &mut Vec<String>) -> anyhow::Result<()> {
    fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    written.push(name.to_string());
    Ok(())
}

pub fn write_matrix(dir: &Path, name: &str, m: &DenseMatrix, w: usize, written: &mut Vec<String>) -> anyhow::Result<()> {
    save_dense(&dir.join(name), m, w).with_context(|| format!("writing {name}"))?;
    written.push(name.to_string());
    Ok(())
}

pub fn prepare_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn finish(dir: &Path, experiment: &str, command: &str, cfg: &RunConfig, mut written: Vec<String>) -> anyhow::Result<Vec<String>> {
    let json = cfg.to_json();
    let manifest = RunManifest {
        experiment: experiment.to_string(),
        command: command.to_string(),
        config: cfg.clone(),
        outputs: written.clone(),
        input_hash: content_hash(&[command.as_bytes(), json.as_bytes()]),
    };
    write_json(dir, "manifest.json", &manifest, &mut written)?;
    Ok(written)
}

/// Spectrum summary around the occupation boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub n: usize,
    #[serde(rename = "N")]
    pub n_electrons: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_n: f64,
    pub lambda_n_plus_1: f64,
    pub gap: f64,
    pub eigenvalues: Vec<f64>,
}

pub fn spectrum_summary(h: &DenseMatrix, n_electrons: usize) -> anyhow::Result<SpectrumSummary> {
    let spec = eig_sym(h)?;
    let n = spec.len();
    if n_electrons == 0 || n_electrons >= n {
        bail!("N = {n_electrons} must lie in [1, {n})");
    }
    let (lo, hi) = (spec.values[n_electrons - 1], spec.values[n_electrons]);
    Ok(SpectrumSummary {
        n,
        n_electrons,
        lambda_min: spec.values[0],
        lambda_max: spec.values[n - 1],
        lambda_n: lo,
        lambda_n_plus_1: hi,
        gap: hi - lo,
        eigenvalues: spec.values.iter().copied().collect(),
    })
}

pub fn cmd_build(cfg: &RunConfig, out: &Path) -> anyhow::Result<Vec<String>> {
    prepare_dir(out)?;
    let h = cfg.hamiltonian()?;
    let mut written = Vec::new();
    write_matrix(out, "H.csv", &h.to_dense(), h.w(), &mut written)?;
    let summary = spectrum_summary(&h.to_dense(), cfg.n_electrons)?;
    write_json(out, "spectrum.json", &summary, &mut written)?;
    finish(out, "build", "build", cfg, written)
}

/// Per-iteration diagnostics as parallel arrays.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct History {
    pub res_pq: Vec<f64>,
    pub res_pr: Vec<f64>,
    pub step: Vec<f64>,
    pub band_energy: Vec<f64>,
    pub objective: Vec<f64>,
}

impl History {
    fn from_records(records: &[IterRecord]) -> Self {
        Self {
            res_pq: records.iter().map(|r| r.res_pq).collect(),
            res_pr: records.iter().map(|r| r.res_pr).collect(),
            step: records.iter().map(|r| r.step).collect(),
            band_energy: records.iter().map(|r| r.band_energy).collect(),
            objective: records.iter().map(|r| r.objective).collect(),
        }
    }
}

/// Deterministic run record; wall-clock data lives in [`Timings`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveMetrics {
    pub solver: SolverKind,
    pub config: RunConfig,
    pub resolved: SolverConfig,
    pub n: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: f64,
    pub energy: EnergyBreakdown,
    pub spectrum_excursion: Option<f64>,
    pub history: History,
    pub bounds: Vec<BoundCheck>,
    pub bounds_note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub mean_iteration_seconds: f64,
    pub iteration_seconds: Vec<f64>,
}

/// A finished solve with `P` densified.
pub struct SolveOutcome {
    pub p: DenseMatrix,
    /// Band of `P`; `floor(n/2)` for the dense solvers.
    pub w: usize,
    pub history: Vec<IterRecord>,
    pub termination: Termination,
    pub energy: EnergyBreakdown,
    pub spectrum_excursion: Option<f64>,
    pub seconds: f64,
}

pub fn run_solver(cfg: &RunConfig) -> anyhow::Result<SolveOutcome> {
    let h = cfg.hamiltonian()?;
    let scfg = cfg.solver_config();
    let start = Instant::now();
    macro_rules! outcome {
        ($rep:expr, $p:expr, $w:expr) => {{
            let rep = $rep;
            SolveOutcome {
                p: $p(&rep.state.p),
                w: $w,
                termination: rep.termination,
                energy: rep.energy,
                spectrum_excursion: rep.spectrum_excursion,
                history: rep.history,
                seconds: start.elapsed().as_secs_f64(),
            }
        }};
    }
    let dense = |p: &DenseMatrix| p.clone();
    let band = |p: &ldm_core::BandedSymMatrix| p.to_dense();
    let half = cfg.n / 2;
    Ok(match cfg.solver {
        SolverKind::Alg1 => outcome!(solve_zero_t_dense(&h.to_dense(), &scfg)?, dense, half),
        SolverKind::Alg2 => outcome!(solve_finite_t_dense(&h.to_dense(), &scfg)?, dense, half),
        SolverKind::Alg4 => outcome!(solve_zero_t_banded(&h, &scfg)?, band, scfg.w),
        SolverKind::Alg5 => outcome!(solve_finite_t_banded(&h, &scfg)?, band, scfg.w),
    })
}

/// Bound checks that apply to a converged dense solution; empty otherwise.
pub fn bound_checks(cfg: &RunConfig, h: &DenseMatrix, p: &DenseMatrix) -> (Vec<BoundCheck>, Option<String>) {
    let Some(eta) = cfg.eta else {
        return (Vec::new(), Some("eta is infinite; the bounds are trivial".into()));
    };
    let res = match cfg.solver {
        SolverKind::Alg1 => check_thm1(h, cfg.n_electrons, eta, p),
        SolverKind::Alg2 => check_thm2(h, cfg.n_electrons, cfg.beta, eta, p),
        _ => return (Vec::new(), Some("bounds are stated for the dense minimizers only".into())),
    };
    match res {
        Ok(checks) => (checks, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    }
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, dump_matrix: bool) -> anyhow::Result<Vec<String>> {
    prepare_dir(out)?;
    let run = run_solver(cfg)?;
    let h = cfg.hamiltonian()?.to_dense();
    let (bounds, bounds_note) = if run.termination == Termination::Converged {
        bound_checks(cfg, &h, &run.p)
    } else {
        (Vec::new(), Some("run did not converge".into()))
    };
    let metrics = SolveMetrics {
        solver: cfg.solver,
        config: cfg.clone(),
        resolved: cfg.solver_config(),
        n: cfg.n,
        iterations: run.history.len(),
        termination: run.termination,
        trace: run.p.trace(),
        energy: run.energy,
        spectrum_excursion: run.spectrum_excursion,
        history: History::from_records(&run.history),
        bounds,
        bounds_note,
    };
    let iteration_seconds: Vec<f64> = run.history.iter().map(|r| r.seconds).collect();
    let timings = Timings {
        total_seconds: run.seconds,
        mean_iteration_seconds: iteration_seconds.iter().sum::<f64>() / iteration_seconds.len().max(1) as f64,
        iteration_seconds,
    };
    let mut written = Vec::new();
    write_json(out, "metrics.json", &metrics, &mut written)?;
    write_json(out, "timings.json", &timings, &mut written)?;
    if dump_matrix {
        write_matrix(out, "P.csv", &run.p, run.w, &mut written)?;
    }
    finish(out, "solve", &format!("solve {}", cfg.solver.name()), cfg, written)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceSummary {
    /// `projector` at zero temperature (alg1/alg4), `fermi_dirac` otherwise.
    pub kind: String,
    pub mu: Option<f64>,
    pub trace: f64,
    pub energy: EnergyBreakdown,
}

/// Exact density matrix for the temperature regime of `cfg.solver`.
pub fn reference_matrix(cfg: &RunConfig, h: &DenseMatrix) -> anyhow::Result<(DenseMatrix, Option<f64>)> {
    let spec = eig_sym(h)?;
    Ok(if cfg.solver.finite_temperature() {
        let (p, mu) = fermi_dirac_from_spectrum(&spec, cfg.beta, cfg.n_electrons as f64)?;
        (p, Some(mu))
    } else {
        (projector_from_spectrum(&spec, cfg.n_electrons)?, None)
    })
}

pub fn cmd_reference(cfg: &RunConfig, out: &Path) -> anyhow::Result<Vec<String>> {
    prepare_dir(out)?;
    let h = cfg.hamiltonian()?.to_dense();
    let (p, mu) = reference_matrix(cfg, &h)?;
    let beta = cfg.solver.finite_temperature().then_some(cfg.beta);
    let (energy, _) = evaluate_projected(&h, &p, beta, None)?;
    let summary = ReferenceSummary {
        kind: if beta.is_some() { "fermi_dirac" } else { "projector" }.into(),
        mu,
        trace: p.trace(),
        energy,
    };
    let mut written = Vec::new();
    write_json(out, "reference.json", &summary, &mut written)?;
    write_matrix(out, "P.csv", &p, cfg.n / 2, &mut written)?;
    finish(out, "reference", "reference", cfg, written)
}

/// `case,w,rel_trace_energy_err,rel_total_energy_err,rel_trunc_dist,rel_frob_dist`
pub fn comparison_csv_header() -> &'static str {
    "case,w,rel_trace_energy_err,rel_total_energy_err,rel_trunc_dist,rel_frob_dist\n"
}

pub fn comparison_csv_row(case: &str, rec: &ComparisonRecord) -> String {
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6e}"));
    format!(
        "{case},{},{},{},{},{}\n",
        rec.w,
        f(rec.rel_trace_energy_err),
        f(rec.rel_total_energy_err),
        f(rec.rel_trunc_dist),
        f(rec.rel_frob_dist)
    )
}

/// Compares the `P.csv` of a banded run against that of a reference run.
/// Both directories need a manifest; `H`, `beta` and `eta` come from the reference.
pub fn cmd_compare(ref_dir: &Path, band_dir: &Path, out: &Path) -> anyhow::Result<Vec<String>> {
    let ref_manifest = RunManifest::load(ref_dir)?;
    let band_manifest = RunManifest::load(band_dir)?;
    let (p_ref, _) = load_dense(&ref_dir.join("P.csv")).with_context(|| format!("loading {}/P.csv", ref_dir.display()))?;
    let (p_band, w) =
        load_dense(&band_dir.join("P.csv")).with_context(|| format!("loading {}/P.csv", band_dir.display()))?;
    let cfg = &ref_manifest.config;
    if p_ref.nrows() != p_band.nrows() {
        bail!("dimension mismatch: reference n = {}, banded n = {}", p_ref.nrows(), p_band.nrows());
    }
    let h = cfg.hamiltonian()?.to_dense();
    if h.nrows() != p_ref.nrows() {
        bail!("reference P has n = {} but its config builds n = {}", p_ref.nrows(), h.nrows());
    }
    let beta = cfg.solver.finite_temperature().then_some(cfg.beta);
    let rec = compare(&p_ref, &p_band, &h, beta, cfg.eta, w, cfg.n_electrons)?;
    prepare_dir(out)?;
    let mut written = Vec::new();
    write_json(out, "compare.json", &rec, &mut written)?;
    let case = band_manifest.config.solver.name();
    write_text(out, "compare.csv", &(comparison_csv_header().to_string() + &comparison_csv_row(case, &rec)), &mut written)?;
    let mut manifest_cfg = band_manifest.config.clone();
    manifest_cfg.seed = cfg.seed;
    finish(out, "compare", "compare", &manifest_cfg, written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchTarget {
    Alg1,
    Alg2,
    Alg4,
    Alg5,
    EigenThreshold,
    FermiDirac,
}

impl From<BenchTarget> for ScalingTarget {
    fn from(t: BenchTarget) -> Self {
        match t {
            BenchTarget::Alg1 => ScalingTarget::Alg1,
            BenchTarget::Alg2 => ScalingTarget::Alg2,
            BenchTarget::Alg4 => ScalingTarget::Alg4,
            BenchTarget::Alg5 => ScalingTarget::Alg5,
            BenchTarget::EigenThreshold => ScalingTarget::EigenThreshold,
            BenchTarget::FermiDirac => ScalingTarget::FermiDirac,
        }
    }
}

pub fn default_sizes(target: ScalingTarget) -> Vec<usize> {
    match target {
        ScalingTarget::Alg1 | ScalingTarget::Alg2 => vec![200, 400, 800, 1600],
        _ => vec![1000, 2000, 4000, 8000],
    }
}

/// Solver configuration for timing `target`; the temperature regime follows the target.
pub fn bench_config(cfg: &RunConfig, target: ScalingTarget) -> SolverConfig {
    let solver = match target {
        ScalingTarget::Alg1 => SolverKind::Alg1,
        ScalingTarget::Alg2 | ScalingTarget::FermiDirac => SolverKind::Alg2,
        ScalingTarget::Alg4 | ScalingTarget::EigenThreshold => SolverKind::Alg4,
        ScalingTarget::Alg5 => SolverKind::Alg5,
    };
    RunConfig { solver, ..cfg.clone() }.solver_config()
}

pub fn run_bench(
    cfg: &RunConfig,
    target: ScalingTarget,
    sizes: &[usize],
    opts: &ScalingOptions,
) -> anyhow::Result<ScalingTable> {
    Ok(scaling_study(target, sizes, &bench_config(cfg, target), opts)?)
}

pub fn cmd_bench(
    cfg: &RunConfig,
    target: ScalingTarget,
    sizes: &[usize],
    opts: &ScalingOptions,
    out: &Path,
) -> anyhow::Result<Vec<String>> {
    prepare_dir(out)?;
    let table = run_bench(cfg, target, sizes, opts)?;
    let mut written = Vec::new();
    write_text(out, "scaling.csv", &table.to_csv(), &mut written)?;
    write_json(out, "scaling.json", &table, &mut written)?;
    finish(out, "bench", &format!("bench {}", target.name()), cfg, written)
}
