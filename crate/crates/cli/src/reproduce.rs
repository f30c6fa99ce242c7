//! End-to-end regeneration of the numerical experiments: matrix dumps for the
//! heatmap figures, the banded-accuracy table, bound checks and scaling tables.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use ldm_core::hamiltonian::PotentialKind;
use ldm_core::metrics::{compare, BoundCheck, ComparisonRecord, ScalingOptions, ScalingTable, ScalingTarget};

use crate::commands::{
    bound_checks, comparison_csv_header, comparison_csv_row, default_sizes, prepare_dir, reference_matrix, run_bench,
    run_solver, spectrum_summary, write_json, write_matrix, write_text, SpectrumSummary,
};
use crate::config::{RunConfig, SolverKind};
use crate::manifest::{content_hash, RunManifest};

/// Finite-temperature overrides; `beta (lambda + r)` must stay below 4.
#[derive(Debug, Clone)]
pub struct FiniteTSettings {
    pub lambda: f64,
    pub r: f64,
    pub m_fd: usize,
    pub dense_tol: f64,
    /// The banded residual stalls at the polynomial floor, so it runs to a cap.
    pub banded_iters: usize,
}

/// Problem sizes and sweeps; `quick` shrinks everything for smoke tests.
#[derive(Debug, Clone)]
pub struct Plan {
    pub base: RunConfig,
    pub zero_t_lambda: f64,
    pub finite_t: FiniteTSettings,
    pub widths: Vec<usize>,
    pub scaling: Vec<(ScalingTarget, Vec<usize>)>,
    pub scaling_opts: ScalingOptions,
}

impl Plan {
    pub fn full(base: &RunConfig) -> Self {
        let targets = [ScalingTarget::Alg4, ScalingTarget::EigenThreshold, ScalingTarget::FermiDirac, ScalingTarget::Alg1];
        Self {
            base: RunConfig { eta: Some(100.0), w: 10, ..base.clone() },
            zero_t_lambda: 40.0,
            finite_t: FiniteTSettings { lambda: 3.5, r: 0.1, m_fd: 30, dense_tol: 1e-5, banded_iters: 600 },
            widths: vec![10, 15, 20],
            scaling: targets.iter().map(|&t| (t, default_sizes(t))).collect(),
            scaling_opts: ScalingOptions::default(),
        }
    }

    pub fn quick(base: &RunConfig) -> Self {
        Self {
            base: RunConfig {
                length: 20.0,
                n: 80,
                n_at: 2,
                n_electrons: 2,
                eta: Some(100.0),
                w: 4,
                max_outer: 4000,
                ..base.clone()
            },
            zero_t_lambda: 40.0,
            finite_t: FiniteTSettings { lambda: 3.5, r: 0.1, m_fd: 30, dense_tol: 1e-5, banded_iters: 200 },
            widths: vec![4, 6, 8],
            scaling: vec![
                (ScalingTarget::Alg4, vec![100, 200, 400]),
                (ScalingTarget::FermiDirac, vec![100, 200, 400]),
                (ScalingTarget::Alg1, vec![40, 80, 160]),
            ],
            scaling_opts: ScalingOptions { warmup: 1, samples: 2 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRow {
    pub case: String,
    pub record: ComparisonRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseBounds {
    pub case: String,
    pub eta: f64,
    pub converged: bool,
    pub checks: Vec<BoundCheck>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub spectrum: SpectrumSummary,
    pub table: Vec<CaseRow>,
    pub bounds: Vec<CaseBounds>,
    pub scaling_slopes: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StageTime {
    stage: String,
    seconds: f64,
}

fn log(msg: &str) {
    eprintln!("[reproduce] {msg}");
}

/// One temperature regime of the table: dense LDM, exact reference, banded sweep.
struct Case {
    name: &'static str,
    dense: RunConfig,
    banded: RunConfig,
}

fn cases(plan: &Plan) -> Vec<Case> {
    let zero = RunConfig { lambda: Some(plan.zero_t_lambda), r: Some(plan.zero_t_lambda), ..plan.base.clone() };
    let ft = &plan.finite_t;
    let kp = RunConfig { beta: 1.0, lambda: Some(ft.lambda), r: Some(ft.r), m_fd: ft.m_fd, ..plan.base.clone() };
    let free = RunConfig { potential: PotentialKind::Free, ..kp.clone() };
    vec![
        Case {
            name: "zero_t_kp",
            dense: RunConfig { solver: SolverKind::Alg1, ..zero.clone() },
            banded: RunConfig { solver: SolverKind::Alg4, ..zero },
        },
        Case {
            name: "finite_t_kp",
            dense: RunConfig { solver: SolverKind::Alg2, tol_outer: Some(ft.dense_tol), ..kp.clone() },
            banded: RunConfig { solver: SolverKind::Alg5, max_outer: ft.banded_iters, ..kp },
        },
        Case {
            name: "finite_t_free",
            dense: RunConfig { solver: SolverKind::Alg2, tol_outer: Some(ft.dense_tol), ..free.clone() },
            banded: RunConfig { solver: SolverKind::Alg5, max_outer: ft.banded_iters, ..free },
        },
    ]
}

pub fn run(plan: &Plan, out: &Path) -> anyhow::Result<(ReproduceSummary, Vec<String>)> {
    prepare_dir(out)?;
    let mut written = Vec::new();
    let mut times = Vec::new();
    let mut stage = |name: String, t: Instant| {
        let seconds = t.elapsed().as_secs_f64();
        log(&format!("{name} done in {seconds:.1} s"));
        times.push(StageTime { stage: name, seconds });
    };

    let h_banded = plan.base.hamiltonian()?;
    let h = h_banded.to_dense();
    write_matrix(out, "H.csv", &h, h_banded.w(), &mut written)?;
    let spectrum = spectrum_summary(&h, plan.base.n_electrons)?;
    write_json(out, "spectrum.json", &spectrum, &mut written)?;

    let mut table = Vec::new();
    let mut bounds = Vec::new();
    let mut table_csv = comparison_csv_header().to_string();
    for case in cases(plan) {
        let t = Instant::now();
        let h = case.dense.hamiltonian()?.to_dense();
        let (p_true, _) = reference_matrix(&case.dense, &h)?;
        write_matrix(out, &format!("P_true_{}.csv", case.name), &p_true, plan.base.n / 2, &mut written)?;

        let dense = run_solver(&case.dense)?;
        let converged = dense.termination == ldm_core::Termination::Converged;
        write_matrix(out, &format!("P_ldm_{}.csv", case.name), &dense.p, dense.w, &mut written)?;
        stage(format!("{} dense ({} iterations)", case.name, dense.history.len()), t);
        let (checks, note) = if converged {
            bound_checks(&case.dense, &h, &dense.p)
        } else {
            (Vec::new(), Some("dense run did not converge".into()))
        };
        bounds.push(CaseBounds {
            case: case.name.into(),
            eta: case.dense.eta.unwrap_or(f64::INFINITY),
            converged,
            checks,
            note,
        });

        let beta = case.dense.solver.finite_temperature().then_some(case.dense.beta);
        for &w in &plan.widths {
            let t = Instant::now();
            let cfg = RunConfig { w, ..case.banded.clone() };
            let band = run_solver(&cfg)?;
            write_matrix(out, &format!("P_w{w}_{}.csv", case.name), &band.p, w, &mut written)?;
            let record = compare(&dense.p, &band.p, &h, beta, case.dense.eta, w, case.dense.n_electrons)?;
            table_csv += &comparison_csv_row(case.name, &record);
            table.push(CaseRow { case: case.name.into(), record });
            stage(format!("{} w={w} ({} iterations)", case.name, band.history.len()), t);
        }
    }
    write_text(out, "band_accuracy.csv", &table_csv, &mut written)?;
    write_json(out, "bounds.json", &bounds, &mut written)?;

    // timing runs stay sequential so they do not compete for cores
    let mut slopes = Vec::new();
    let mut tables: Vec<ScalingTable> = Vec::new();
    for (target, sizes) in &plan.scaling {
        let t = Instant::now();
        let table = run_bench(&plan.base, *target, sizes, &plan.scaling_opts)?;
        write_text(out, &format!("scaling_{}.csv", target.name()), &table.to_csv(), &mut written)?;
        slopes.push((target.name().to_string(), table.slope));
        stage(format!("scaling {} (slope {:.2})", target.name(), table.slope), t);
        tables.push(table);
    }
    write_json(out, "scaling.json", &tables, &mut written)?;
    write_json(out, "timings.json", &times, &mut written)?;

    let summary = ReproduceSummary { spectrum, table, bounds, scaling_slopes: slopes };
    let json = plan.base.to_json();
    let manifest = RunManifest {
        experiment: "reproduce".into(),
        command: "reproduce".into(),
        config: plan.base.clone(),
        outputs: written.clone(),
        input_hash: content_hash(&[b"reproduce", json.as_bytes()]),
    };
    write_json(out, "manifest.json", &manifest, &mut written)?;
    Ok((summary, written))
}
