//! Split-Bregman solvers for localized density matrices.
//!
//! Zero temperature minimizes `tr(HP) + (1/eta) |||P|||_1` over
//! `{P = P^T, tr P = N, 0 <= P <= I}` by splitting `Q = P` (l1 term) and
//! `R = P` (spectral box), with additive multipliers `B`, `D`. Finite
//! temperature adds `(1/beta) tr phi(P)` and moves the trace constraint
//! onto `Q`. The banded variants keep every iterate in a cyclic band and
//! replace eigendecompositions by Chebyshev matrix polynomials.

pub mod ops;
pub mod steps;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::banded::{BandedSymMatrix, PowerOptions};
use crate::chebyshev::ChebOptions;
use crate::dense::DenseMatrix;
use crate::energy::{evaluate_projected, EnergyBreakdown};
use crate::error::{LdmError, Result};

pub use ops::{ChebyshevBackend, DenseBackend, SpectralBackend, SymOps};
pub use steps::{
    contraction_factor, p_subproblem_finite_t, p_update_zero_t, q_update_finite_t, qd_inner_bregman, shrink,
    shrink_vec, PSubproblem,
};

/// Every run parameter of the four solvers. `None` for `eta` or `beta`
/// means the parameter is infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "N")]
    pub n_electrons: usize,
    pub lambda: f64,
    pub r: f64,
    pub w: usize,
    pub m_et: usize,
    pub m_fd: usize,
    /// Relative residual for termination; `None` picks 1e-6 (dense) or 1e-5 (banded).
    pub tol_outer: Option<f64>,
    pub max_outer: usize,
    pub inner_fp_iters: usize,
    pub inner_qd_iters: usize,
    pub seed: u64,
    /// Permit `beta (lambda + r) >= 4` in the finite-temperature P-update.
    pub allow_slow_contraction: bool,
    pub w_work: Option<usize>,
    pub jackson: bool,
    pub power_margin: f64,
    /// Evaluate the entropy of the final banded iterate (densifies it).
    pub final_entropy: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: Some(100.0),
            beta: None,
            n_electrons: 10,
            lambda: 10.0,
            r: 10.0,
            w: 20,
            m_et: 50,
            m_fd: 20,
            tol_outer: None,
            max_outer: 5000,
            inner_fp_iters: 5,
            inner_qd_iters: 20,
            seed: 42,
            allow_slow_contraction: false,
            w_work: None,
            jackson: false,
            power_margin: 0.05,
            final_entropy: true,
        }
    }
}

impl SolverConfig {
    /// Zero-temperature defaults: `lambda = r = 10`.
    pub fn zero_temperature(n_electrons: usize, eta: Option<f64>) -> Self {
        Self { eta, beta: None, n_electrons, ..Self::default() }
    }

    /// Finite-temperature defaults: `lambda = r = 1.5`, so `beta = 1` gives
    /// `beta (lambda + r) = 3 < 4`.
    pub fn finite_temperature(n_electrons: usize, beta: f64, eta: Option<f64>) -> Self {
        Self { eta, beta: Some(beta), n_electrons, lambda: 1.5, r: 1.5, m_et: 40, ..Self::default() }
    }

    pub fn cheb_options(&self) -> ChebOptions {
        ChebOptions {
            w_work: self.w_work,
            jackson: self.jackson,
            power: PowerOptions { margin: self.power_margin, seed: self.seed, ..PowerOptions::default() },
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LdmError::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("r", self.r)?;
        if let Some(eta) = self.eta {
            positive("eta", eta)?;
        }
        if let Some(beta) = self.beta {
            positive("beta", beta)?;
        }
        if self.n_electrons > n {
            return Err(LdmError::Config(format!("N = {} exceeds dimension {n}", self.n_electrons)));
        }
        if let Some(tol) = self.tol_outer {
            positive("tol_outer", tol)?;
        }
        if self.power_margin < 0.0 {
            return Err(LdmError::Config("power_margin must be nonnegative".into()));
        }
        Ok(())
    }

    fn tolerance(&self, banded: bool) -> f64 {
        self.tol_outer.unwrap_or(if banded { 1e-5 } else { 1e-6 })
    }
}

/// The five iterates of a split-Bregman run.
#[derive(Debug, Clone)]
pub struct IterState<M> {
    pub p: M,
    pub q: M,
    pub r: M,
    pub b: M,
    pub d: M,
    pub k: usize,
}

impl<M: SymOps> IterState<M> {
    /// `P = Q = R = (N/n) I`, `B = D = 0`, using `template` for shape.
    fn initial(template: &M, n_electrons: usize) -> Self {
        let n = template.dim() as f64;
        let p = template.scaled_identity_like(n_electrons as f64 / n);
        let zero = template.scaled_identity_like(0.0);
        Self { q: p.clone(), r: p.clone(), p, b: zero.clone(), d: zero, k: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxOuter,
}

/// Per-iteration diagnostics. `objective` is `tr(HP) + (1/eta) |||P|||_1`;
/// the entropy is only evaluated for the final iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub res_pq: f64,
    pub res_pr: f64,
    pub step: f64,
    pub band_energy: f64,
    pub objective: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport<M> {
    pub state: IterState<M>,
    pub history: Vec<IterRecord>,
    pub termination: Termination,
    /// Full breakdown at the final `P`, entropy included when `beta` is finite
    /// (omitted for banded runs with `final_entropy = false`).
    pub energy: EnergyBreakdown,
    /// Largest eigenvalue excursion of the final `P` outside `[0, 1]`, when measured.
    pub spectrum_excursion: Option<f64>,
}

impl<M> SolveReport<M> {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn mean_iteration_seconds(&self) -> f64 {
        if self.history.is_empty() {
            return 0.0;
        }
        self.history.iter().map(|r| r.seconds).sum::<f64>() / self.history.len() as f64
    }
}

/// Called after every outer iteration with the previous and current state.
pub type Observer<'a, M> = &'a mut dyn FnMut(&IterState<M>, &IterState<M>);

fn record<M: SymOps>(h: &M, cfg: &SolverConfig, prev_p: &M, state: &IterState<M>, seconds: f64) -> IterRecord {
    let mut pq = state.p.clone();
    pq.axpy(-1.0, &state.q);
    let mut pr = state.p.clone();
    pr.axpy(-1.0, &state.r);
    let mut step = state.p.clone();
    step.axpy(-1.0, prev_p);
    let band_energy = h.dot(&state.p);
    IterRecord {
        res_pq: pq.frobenius(),
        res_pr: pr.frobenius(),
        step: step.frobenius(),
        band_energy,
        objective: band_energy + cfg.eta.map_or(0.0, |e| state.p.l1() / e),
        seconds,
    }
}

/// Primal residuals and the step `|P^k - P^{k-1}|` (a dual residual proxy),
/// relative to `max(1, |P|)`.
fn finished(rec: &IterRecord, p: &impl SymOps, tol: f64) -> bool {
    rec.res_pq.max(rec.res_pr).max(rec.step) / p.frobenius().max(1.0) < tol
}

/// Zero-temperature outer loop, generic over the spectral backend.
pub fn solve_zero_t<B: SpectralBackend>(
    h: &B::Mat,
    cfg: &SolverConfig,
    backend: &mut B,
    tol: f64,
    mut observer: Option<Observer<'_, B::Mat>>,
) -> Result<(IterState<B::Mat>, Vec<IterRecord>, Termination)> {
    let n_occ = cfg.n_electrons as f64;
    let (lambda, r) = (cfg.lambda, cfg.r);
    let shrink_t = steps::l1_threshold(cfg.eta, lambda);
    let mut state = IterState::initial(h, cfg.n_electrons);
    let mut history = Vec::new();
    for k in 1..=cfg.max_outer {
        let start = Instant::now();
        let prev = state.clone();
        let p = p_update_zero_t(&prev.q, &prev.b, &prev.r, &prev.d, h, lambda, r, n_occ);
        let mut pb = p.clone();
        pb.axpy(1.0, &prev.b);
        let q = pb.shrink(shrink_t);
        let mut pd = p.clone();
        pd.axpy(1.0, &prev.d);
        let r_mat = backend.threshold(&pd)?;
        let mut b = prev.b.clone();
        b.axpy(1.0, &p);
        b.axpy(-1.0, &q);
        let mut d = prev.d.clone();
        d.axpy(1.0, &p);
        d.axpy(-1.0, &r_mat);
        state = IterState { p, q, r: r_mat, b, d, k };
        let seconds = start.elapsed().as_secs_f64();
        let rec = record(h, cfg, &prev.p, &state, seconds);
        history.push(rec);
        if let Some(obs) = observer.as_mut() {
            obs(&prev, &state);
        }
        if finished(&rec, &state.p, tol) {
            return Ok((state, history, Termination::Converged));
        }
    }
    Ok((state, history, Termination::MaxOuter))
}

/// Finite-temperature outer loop, generic over the spectral backend.
pub fn solve_finite_t<B: SpectralBackend>(
    h: &B::Mat,
    cfg: &SolverConfig,
    backend: &mut B,
    tol: f64,
    mut observer: Option<Observer<'_, B::Mat>>,
) -> Result<(IterState<B::Mat>, Vec<IterRecord>, Termination)> {
    let beta = cfg
        .beta
        .ok_or_else(|| LdmError::Config("finite-temperature solver needs a finite beta".into()))?;
    let n_occ = cfg.n_electrons as f64;
    let (lambda, r) = (cfg.lambda, cfg.r);
    let probe = PSubproblem { h, q: h, b: h, r_mat: h, d: h, beta, lambda, r };
    probe.check_contraction(cfg.allow_slow_contraction)?;

    let mut state = IterState::initial(h, cfg.n_electrons);
    let mut history = Vec::new();
    for k in 1..=cfg.max_outer {
        let start = Instant::now();
        let prev = state.clone();
        let sub = PSubproblem { h, q: &prev.q, b: &prev.b, r_mat: &prev.r, d: &prev.d, beta, lambda, r };
        let p = sub.solve(backend, &prev.p, cfg.inner_fp_iters)?;
        let q = q_update_finite_t(&p, &prev.b, cfg.eta, lambda, r, n_occ, cfg.inner_qd_iters);
        let mut pd = p.clone();
        pd.axpy(1.0, &prev.d);
        let r_mat = backend.threshold(&pd)?;
        let mut b = prev.b.clone();
        b.axpy(1.0, &p);
        b.axpy(-1.0, &q);
        let mut d = prev.d.clone();
        d.axpy(1.0, &p);
        d.axpy(-1.0, &r_mat);
        state = IterState { p, q, r: r_mat, b, d, k };
        let seconds = start.elapsed().as_secs_f64();
        let rec = record(h, cfg, &prev.p, &state, seconds);
        history.push(rec);
        if let Some(obs) = observer.as_mut() {
            obs(&prev, &state);
        }
        if finished(&rec, &state.p, tol) {
            return Ok((state, history, Termination::Converged));
        }
    }
    Ok((state, history, Termination::MaxOuter))
}

fn check_dense_input(h: &DenseMatrix, cfg: &SolverConfig) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(LdmError::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    cfg.validate(h.nrows())
}

fn dense_report(
    h: &DenseMatrix,
    cfg: &SolverConfig,
    (state, history, termination): (IterState<DenseMatrix>, Vec<IterRecord>, Termination),
) -> Result<SolveReport<DenseMatrix>> {
    let (energy, excursion) = evaluate_projected(h, &state.p, cfg.beta, cfg.eta)?;
    Ok(SolveReport { state, history, termination, energy, spectrum_excursion: Some(excursion) })
}

/// Dense zero-temperature solver with exact eigenvalue thresholding.
pub fn solve_zero_t_dense(h: &DenseMatrix, cfg: &SolverConfig) -> Result<SolveReport<DenseMatrix>> {
    solve_zero_t_dense_observed(h, cfg, None)
}

pub fn solve_zero_t_dense_observed(
    h: &DenseMatrix,
    cfg: &SolverConfig,
    observer: Option<Observer<'_, DenseMatrix>>,
) -> Result<SolveReport<DenseMatrix>> {
    check_dense_input(h, cfg)?;
    let out = solve_zero_t(h, cfg, &mut DenseBackend, cfg.tolerance(false), observer)?;
    let zero_t = SolverConfig { beta: None, ..cfg.clone() };
    dense_report(h, &zero_t, out)
}

/// Dense finite-temperature solver with exact Fermi-Dirac and thresholding.
pub fn solve_finite_t_dense(h: &DenseMatrix, cfg: &SolverConfig) -> Result<SolveReport<DenseMatrix>> {
    solve_finite_t_dense_observed(h, cfg, None)
}

pub fn solve_finite_t_dense_observed(
    h: &DenseMatrix,
    cfg: &SolverConfig,
    observer: Option<Observer<'_, DenseMatrix>>,
) -> Result<SolveReport<DenseMatrix>> {
    check_dense_input(h, cfg)?;
    let out = solve_finite_t(h, cfg, &mut DenseBackend, cfg.tolerance(false), observer)?;
    dense_report(h, cfg, out)
}

fn banded_setup(h: &BandedSymMatrix, cfg: &SolverConfig) -> Result<(BandedSymMatrix, ChebyshevBackend)> {
    cfg.validate(h.n())?;
    if cfg.w < h.w() {
        return Err(LdmError::Config(format!(
            "band width {} is narrower than the Hamiltonian band {}",
            cfg.w,
            h.w()
        )));
    }
    if cfg.w > h.n() / 2 {
        return Err(LdmError::Config(format!("band width {} exceeds floor(n/2) = {}", cfg.w, h.n() / 2)));
    }
    let backend = ChebyshevBackend { w: cfg.w, m_et: cfg.m_et, m_fd: cfg.m_fd, opts: cfg.cheb_options() };
    Ok((h.widen(cfg.w)?, backend))
}

fn banded_report(
    h: &BandedSymMatrix,
    cfg: &SolverConfig,
    (state, history, termination): (IterState<BandedSymMatrix>, Vec<IterRecord>, Termination),
) -> Result<SolveReport<BandedSymMatrix>> {
    let band = h.dot(&state.p)?;
    let l1 = cfg.eta.map_or(0.0, |e| state.p.entrywise_l1() / e);
    let (energy, excursion) = match cfg.beta {
        Some(_) if cfg.final_entropy => {
            let (e, ex) = evaluate_projected(&h.to_dense(), &state.p.to_dense(), cfg.beta, cfg.eta)?;
            (e, Some(ex))
        }
        _ => (
            EnergyBreakdown { band_energy: band, entropy_term: 0.0, l1_term: l1, total: band + l1 },
            None,
        ),
    };
    Ok(SolveReport { state, history, termination, energy, spectrum_excursion: excursion })
}

/// Linear-scaling zero-temperature solver: iterates stay in band `cfg.w`
/// and eigenvalue thresholding uses a degree-`m_et` Chebyshev polynomial.
pub fn solve_zero_t_banded(h: &BandedSymMatrix, cfg: &SolverConfig) -> Result<SolveReport<BandedSymMatrix>> {
    solve_zero_t_banded_observed(h, cfg, None)
}

pub fn solve_zero_t_banded_observed(
    h: &BandedSymMatrix,
    cfg: &SolverConfig,
    observer: Option<Observer<'_, BandedSymMatrix>>,
) -> Result<SolveReport<BandedSymMatrix>> {
    let (hw, mut backend) = banded_setup(h, cfg)?;
    let out = solve_zero_t(&hw, cfg, &mut backend, cfg.tolerance(true), observer)?;
    let zero_t = SolverConfig { beta: None, ..cfg.clone() };
    banded_report(&hw, &zero_t, out)
}

/// Linear-scaling finite-temperature solver with Chebyshev Fermi-Dirac
/// (degree `m_fd`) and thresholding (degree `m_et`).
pub fn solve_finite_t_banded(h: &BandedSymMatrix, cfg: &SolverConfig) -> Result<SolveReport<BandedSymMatrix>> {
    solve_finite_t_banded_observed(h, cfg, None)
}

pub fn solve_finite_t_banded_observed(
    h: &BandedSymMatrix,
    cfg: &SolverConfig,
    observer: Option<Observer<'_, BandedSymMatrix>>,
) -> Result<SolveReport<BandedSymMatrix>> {
    let (hw, mut backend) = banded_setup(h, cfg)?;
    let out = solve_finite_t(&hw, cfg, &mut backend, cfg.tolerance(true), observer)?;
    banded_report(&hw, cfg, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn zero_t_diagonal_recovers_projector() {
        let h = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let cfg = SolverConfig { lambda: 1.0, r: 1.0, ..SolverConfig::zero_temperature(1, Some(1e8)) };
        let rep = solve_zero_t_dense(&h, &cfg).unwrap();
        assert!(rep.converged());
        let expected = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!((&rep.state.p - expected).abs().max() < 1e-4);
        assert!((rep.state.p.trace() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn finite_t_requires_beta() {
        let h = DenseMatrix::identity(4, 4);
        let cfg = SolverConfig::zero_temperature(2, None);
        assert!(matches!(solve_finite_t_dense(&h, &cfg), Err(LdmError::Config(_))));
    }

    #[test]
    fn finite_t_rejects_expansive_penalties() {
        let h = DenseMatrix::identity(4, 4);
        let cfg = SolverConfig { lambda: 3.0, r: 3.0, ..SolverConfig::finite_temperature(2, 1.0, None) };
        assert!(matches!(solve_finite_t_dense(&h, &cfg), Err(LdmError::Config(_))));
    }

    #[test]
    fn banded_rejects_narrow_band() {
        let mut h = BandedSymMatrix::zeros(10, 2).unwrap();
        h.shift_diag(1.0);
        let cfg = SolverConfig { w: 1, ..SolverConfig::zero_temperature(2, Some(10.0)) };
        assert!(matches!(solve_zero_t_banded(&h, &cfg), Err(LdmError::Config(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = SolverConfig { beta: Some(2.0), eta: None, w_work: Some(30), ..SolverConfig::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: SolverConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
