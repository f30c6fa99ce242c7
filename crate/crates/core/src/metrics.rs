//! Banded-vs-reference comparisons, theorem bound checks and timing studies.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::BandedSymMatrix;
use crate::bregman::{
    solve_finite_t_banded, solve_finite_t_dense, solve_zero_t_banded, solve_zero_t_dense, IterRecord, SolverConfig,
};
use crate::chebyshev::{eigen_threshold_cheby, fermi_dirac_cheby};
use crate::dense::{eig_sym, fermi_dirac_from_spectrum, projector_from_spectrum, DenseMatrix};
use crate::energy::{entrywise_l1, evaluate_projected};
use crate::error::{check_dim, LdmError, Result};
use crate::hamiltonian::{build_hamiltonian, DomainSpec, PotentialSpec};

/// Relative errors of a banded solution `P_w` against a reference `P`.
/// A field is `None` when its denominator vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub rel_trace_energy_err: Option<f64>,
    pub rel_total_energy_err: Option<f64>,
    pub rel_trunc_dist: Option<f64>,
    pub rel_frob_dist: Option<f64>,
    pub w: usize,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub n: usize,
    #[serde(rename = "N")]
    pub n_electrons: usize,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Frobenius projection onto the cyclic band `w`.
pub fn truncate_dense(p: &DenseMatrix, w: usize) -> DenseMatrix {
    let n = p.nrows();
    DenseMatrix::from_fn(n, n, |i, j| if crate::banded::cyclic_dist(i, j, n) <= w { p[(i, j)] } else { 0.0 })
}

#[allow(clippy::too_many_arguments)]
pub fn compare(
    p_ref: &DenseMatrix,
    p_band: &DenseMatrix,
    h: &DenseMatrix,
    beta: Option<f64>,
    eta: Option<f64>,
    w: usize,
    n_electrons: usize,
) -> Result<ComparisonRecord> {
    check_dim(p_ref.nrows(), p_band.nrows())?;
    check_dim(p_ref.nrows(), h.nrows())?;
    let (e_ref, _) = evaluate_projected(h, p_ref, beta, eta)?;
    let (e_band, _) = evaluate_projected(h, p_band, beta, eta)?;
    let norm = p_ref.norm();
    Ok(ComparisonRecord {
        rel_trace_energy_err: ratio((e_ref.band_energy - e_band.band_energy).abs(), e_ref.band_energy.abs()),
        rel_total_energy_err: ratio((e_ref.total - e_band.total).abs(), e_ref.total.abs()),
        rel_trunc_dist: ratio((p_ref - truncate_dense(p_ref, w)).norm(), norm),
        rel_frob_dist: ratio((p_ref - p_band).norm(), norm),
        w,
        beta,
        eta,
        n: p_ref.nrows(),
        n_electrons,
    })
}

/// Both sides of one inequality `lhs <= rhs`; `slack = rhs - lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        Self { name: name.to_string(), lhs, rhs, slack, holds: slack >= 0.0 }
    }
}

/// Zero-temperature consistency bounds for a regularized minimizer `p_eta`:
/// `0 <= tr(H P_eta) - tr(H P_inf) <= |||P_inf|||_1 / eta` and
/// `||P_eta - P_inf||_F^2 <= 2 |||P_inf|||_1 / (eta (lambda_{N+1} - lambda_N))`.
pub fn check_thm1(h: &DenseMatrix, n_occ: usize, eta: f64, p_eta: &DenseMatrix) -> Result<Vec<BoundCheck>> {
    check_dim(h.nrows(), p_eta.nrows())?;
    if !(eta > 0.0) {
        return Err(LdmError::Parameter(format!("eta must be positive, got {eta}")));
    }
    let n = h.nrows();
    if n_occ == 0 || n_occ >= n {
        return Err(LdmError::Parameter(format!("occupation {n_occ} must lie in [1, {n})")));
    }
    let spec = eig_sym(h)?;
    let p_inf = projector_from_spectrum(&spec, n_occ)?;
    let gap = spec.values[n_occ] - spec.values[n_occ - 1];
    let l1 = entrywise_l1(&p_inf);
    let de = h.dot(p_eta) - h.dot(&p_inf);
    let dist2 = (p_eta - &p_inf).norm_squared();
    Ok(vec![
        BoundCheck::new("thm1_energy_lower", 0.0, de),
        BoundCheck::new("thm1_energy_upper", de, l1 / eta),
        BoundCheck::new("thm1_frobenius", dist2, 2.0 * l1 / (eta * gap)),
    ])
}

/// Finite-temperature consistency bounds for `p_eta` against the Fermi-Dirac
/// matrix `P_beta` with chemical potential `mu`: the free-energy gap, the
/// weighted trace `tr(max(1/beta, |H - mu|) (P_eta - P_beta)^2)` (weights applied
/// in the eigenbasis of `H`), and the Frobenius corollary with factor
/// `min(beta, 1 / min_i |lambda_i - mu|)`.
pub fn check_thm2(h: &DenseMatrix, n_occ: usize, beta: f64, eta: f64, p_eta: &DenseMatrix) -> Result<Vec<BoundCheck>> {
    check_dim(h.nrows(), p_eta.nrows())?;
    if !(eta > 0.0) {
        return Err(LdmError::Parameter(format!("eta must be positive, got {eta}")));
    }
    let spec = eig_sym(h)?;
    let (p_beta, mu) = fermi_dirac_from_spectrum(&spec, beta, n_occ as f64)?;
    let l1 = entrywise_l1(&p_beta);
    let (e_eta, _) = evaluate_projected(h, p_eta, Some(beta), None)?;
    let (e_ref, _) = evaluate_projected(h, &p_beta, Some(beta), None)?;
    let de = e_eta.total - e_ref.total;

    let diff = p_eta - &p_beta;
    let rotated = &diff * &spec.vectors;
    let weighted: f64 = rotated
        .column_iter()
        .zip(spec.values.iter())
        .map(|(col, &lam)| (1.0 / beta).max((lam - mu).abs()) * col.norm_squared())
        .sum();
    let closest = spec.values.iter().map(|&lam| (lam - mu).abs()).fold(f64::INFINITY, f64::min);
    let factor = if closest > 0.0 { beta.min(1.0 / closest) } else { beta };
    Ok(vec![
        BoundCheck::new("thm2_energy_lower", 0.0, de),
        BoundCheck::new("thm2_energy_upper", de, l1 / eta),
        BoundCheck::new("thm2_weighted_trace", weighted, l1 / eta),
        BoundCheck::new("thm2_frobenius", diff.norm_squared(), l1 / eta * factor),
    ])
}

/// What a scaling study times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingTarget {
    Alg1,
    Alg2,
    Alg4,
    Alg5,
    EigenThreshold,
    FermiDirac,
}

impl ScalingTarget {
    pub fn name(self) -> &'static str {
        match self {
            ScalingTarget::Alg1 => "alg1",
            ScalingTarget::Alg2 => "alg2",
            ScalingTarget::Alg4 => "alg4",
            ScalingTarget::Alg5 => "alg5",
            ScalingTarget::EigenThreshold => "eigen_threshold_cheby",
            ScalingTarget::FermiDirac => "fermi_dirac_cheby",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScalingOptions {
    pub warmup: usize,
    pub samples: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self { warmup: 2, samples: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub t_mean: f64,
    pub t_median: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingTable {
    pub target: ScalingTarget,
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
}

impl ScalingTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,t_mean,t_median\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.9e},{:.9e}\n", r.n, r.t_mean, r.t_median));
        }
        s
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Least-squares slope of `ln t` against `ln n`.
pub fn fit_loglog_slope(ns: &[usize], ts: &[f64]) -> Result<f64> {
    if ns.len() != ts.len() || ns.len() < 2 {
        return Err(LdmError::Parameter("slope fit needs at least two (n, t) pairs".into()));
    }
    if ts.iter().any(|&t| !(t > 0.0)) {
        return Err(LdmError::Parameter("slope fit needs positive times".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(LdmError::Parameter("slope fit needs distinct sizes".into()));
    }
    Ok(sxy / sxx)
}

/// Modified Kronig-Penney system at fixed grid spacing 0.25 with one well
/// per 10 length units, so that the physics is size independent.
pub fn scaling_hamiltonian(n: usize) -> Result<(BandedSymMatrix, usize)> {
    let length = n as f64 / 4.0;
    let n_at = (n / 40).max(1);
    let h = build_hamiltonian(&DomainSpec { length, n }, &PotentialSpec::kronig_penney(10.0, 1.0, n_at, length))?;
    Ok((h, n_at))
}

fn random_banded(n: usize, w: usize, rng: &mut ChaCha8Rng) -> Result<BandedSymMatrix> {
    let mut m = BandedSymMatrix::zeros(n, w)?;
    for i in 0..n {
        for d in 0..=w {
            m.set(i, (i + d) % n, rng.random_range(-1.0..1.0) / (1.0 + d as f64));
        }
    }
    Ok(m)
}

fn solver_samples(target: ScalingTarget, n: usize, cfg: &SolverConfig, opts: &ScalingOptions) -> Result<Vec<f64>> {
    let (h, n_at) = scaling_hamiltonian(n)?;
    let mut cfg = cfg.clone();
    cfg.n_electrons = n_at;
    cfg.max_outer = opts.warmup + opts.samples;
    // a subnormal tolerance never triggers in practice, so every requested iteration runs
    cfg.tol_outer = Some(f64::MIN_POSITIVE);
    cfg.final_entropy = false;
    let history: Vec<IterRecord> = match target {
        ScalingTarget::Alg1 => solve_zero_t_dense(&h.to_dense(), &cfg)?.history,
        ScalingTarget::Alg2 => solve_finite_t_dense(&h.to_dense(), &cfg)?.history,
        ScalingTarget::Alg4 => solve_zero_t_banded(&h, &cfg)?.history,
        ScalingTarget::Alg5 => solve_finite_t_banded(&h, &cfg)?.history,
        _ => unreachable!("kernel targets are timed directly"),
    };
    if history.len() <= opts.warmup {
        return Err(LdmError::Degenerate(format!("solver stopped after {} iterations at n = {n}", history.len())));
    }
    Ok(history.iter().skip(opts.warmup).map(|r| r.seconds).collect())
}

fn kernel_samples(target: ScalingTarget, n: usize, cfg: &SolverConfig, opts: &ScalingOptions) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = random_banded(n, cfg.w, &mut rng)?;
    let cheb = cfg.cheb_options();
    let beta = cfg.beta.unwrap_or(1.0);
    let mut out = Vec::with_capacity(opts.samples);
    for k in 0..opts.warmup + opts.samples {
        let start = Instant::now();
        match target {
            ScalingTarget::EigenThreshold => {
                std::hint::black_box(eigen_threshold_cheby(&m, cfg.m_et, &cheb)?);
            }
            ScalingTarget::FermiDirac => {
                std::hint::black_box(fermi_dirac_cheby(&m, beta, cfg.m_fd, cfg.w, &cheb)?);
            }
            _ => unreachable!("solver targets are timed per iteration"),
        }
        if k >= opts.warmup {
            out.push(start.elapsed().as_secs_f64());
        }
    }
    Ok(out)
}

/// Times `target` at each size (seconds per iteration or per kernel call) and
/// fits the log-log slope. Runs strictly sequentially.
pub fn scaling_study(
    target: ScalingTarget,
    sizes: &[usize],
    cfg: &SolverConfig,
    opts: &ScalingOptions,
) -> Result<ScalingTable> {
    if sizes.windows(2).any(|p| p[1] <= p[0]) {
        return Err(LdmError::Parameter("sizes must be strictly ascending".into()));
    }
    if opts.samples == 0 {
        return Err(LdmError::Parameter("need at least one timed sample".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let samples = match target {
            ScalingTarget::EigenThreshold | ScalingTarget::FermiDirac => kernel_samples(target, n, cfg, opts)?,
            _ => solver_samples(target, n, cfg, opts)?,
        };
        let t_mean = samples.iter().sum::<f64>() / samples.len() as f64;
        rows.push(ScalingRow { n, t_mean, t_median: median(&samples) });
    }
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.t_median).collect();
    let slope = fit_loglog_slope(&ns, &ts)?;
    Ok(ScalingTable { target, rows, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::projector_density_matrix;
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_diagonal(&DVector::from_vec(v.to_vec()))
    }

    #[test]
    fn self_comparison_is_zero() {
        let h = diag(&[1.0, 2.0, 3.0, 4.0]);
        let p = projector_density_matrix(&h, 2).unwrap();
        let rec = compare(&p, &p, &h, None, Some(10.0), 2, 2).unwrap();
        assert_eq!(rec.rel_trace_energy_err, Some(0.0));
        assert_eq!(rec.rel_total_energy_err, Some(0.0));
        assert_eq!(rec.rel_trunc_dist, Some(0.0));
        assert_eq!(rec.rel_frob_dist, Some(0.0));
    }

    #[test]
    fn hand_built_three_by_three() {
        let h = diag(&[1.0, 2.0, 3.0]);
        let p = DenseMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.1, 0.2, 0.3, 0.0, 0.1, 0.0, 0.2]);
        let q = DenseMatrix::from_row_slice(3, 3, &[0.6, 0.2, 0.0, 0.2, 0.3, 0.0, 0.0, 0.0, 0.1]);
        // n = 3, w = 0 keeps only the diagonal
        let rec = compare(&p, &q, &h, None, Some(2.0), 0, 1).unwrap();
        let tr_p = 0.5 + 0.6 + 0.6;
        let tr_q = 0.6 + 0.6 + 0.3;
        assert!((rec.rel_trace_energy_err.unwrap() - (tr_p - tr_q) / tr_p).abs() < 1e-15);
        let e_p = tr_p + 0.5 * (0.5 + 0.3 + 0.2 + 2.0 * (0.2 + 0.1));
        let e_q = tr_q + 0.5 * (0.6 + 0.3 + 0.1 + 2.0 * 0.2);
        assert!((rec.rel_total_energy_err.unwrap() - (e_p - e_q).abs() / e_p).abs() < 1e-15);
        let norm_p = (0.25f64 + 0.09 + 0.04 + 2.0 * (0.04 + 0.01)).sqrt();
        assert!((rec.rel_trunc_dist.unwrap() - (2.0 * (0.04f64 + 0.01)).sqrt() / norm_p).abs() < 1e-15);
        let d = (0.01f64 + 2.0 * 0.01 + 0.01).sqrt();
        assert!((rec.rel_frob_dist.unwrap() - d / norm_p).abs() < 1e-15);
    }

    #[test]
    fn zero_reference_flags_ratios() {
        let z = DenseMatrix::zeros(3, 3);
        let rec = compare(&z, &DenseMatrix::identity(3, 3), &z, None, None, 1, 1).unwrap();
        assert_eq!(rec.rel_frob_dist, None);
        assert_eq!(rec.rel_trace_energy_err, None);
    }

    #[test]
    fn frobenius_numerator_symmetric() {
        let h = diag(&[1.0, 2.0]);
        let a = diag(&[1.0, 0.0]);
        let b = DenseMatrix::from_row_slice(2, 2, &[0.8, 0.1, 0.1, 0.2]);
        let ab = compare(&a, &b, &h, None, None, 1, 1).unwrap().rel_frob_dist.unwrap() * a.norm();
        let ba = compare(&b, &a, &h, None, None, 1, 1).unwrap().rel_frob_dist.unwrap() * b.norm();
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn thm1_exact_projector_has_zero_lhs() {
        let h = diag(&[1.0, 2.0, 3.0, 5.0]);
        let p = projector_density_matrix(&h, 2).unwrap();
        let checks = check_thm1(&h, 2, 1e8, &p).unwrap();
        assert!(checks.iter().all(|c| c.holds));
        assert!(checks.iter().all(|c| c.lhs.abs() < 1e-14));
    }

    #[test]
    fn thm1_rejects_degenerate_gap() {
        let h = diag(&[1.0, 2.0, 2.0]);
        assert!(matches!(check_thm1(&h, 2, 10.0, &h), Err(LdmError::Degenerate(_))));
    }

    #[test]
    fn thm2_reference_has_zero_lhs() {
        let h = diag(&[-1.0, 0.5, 2.0]);
        let spec = eig_sym(&h).unwrap();
        let (p, _) = fermi_dirac_from_spectrum(&spec, 1.0, 1.0).unwrap();
        let checks = check_thm2(&h, 1, 1.0, 100.0, &p).unwrap();
        assert_eq!(checks.len(), 4);
        assert!(checks.iter().all(|c| c.holds && c.lhs.abs() < 1e-13), "{checks:?}");
    }

    #[test]
    fn thm2_detects_a_violation() {
        let h = diag(&[-1.0, 0.5, 2.0]);
        // a far-from-optimal trace-one matrix breaks the upper bounds at large eta
        let p = diag(&[0.0, 0.0, 1.0]);
        let checks = check_thm2(&h, 1, 1.0, 1e6, &p).unwrap();
        assert!(checks.iter().filter(|c| c.name != "thm2_energy_lower").all(|c| !c.holds));
    }

    #[test]
    fn slope_of_power_law() {
        let ns = [100, 200, 400, 800];
        let ts: Vec<f64> = ns.iter().map(|&n| 3e-7 * (n as f64).powf(1.7)).collect();
        assert!((fit_loglog_slope(&ns, &ts).unwrap() - 1.7).abs() < 1e-12);
        assert!(fit_loglog_slope(&[1], &[1.0]).is_err());
        assert!(fit_loglog_slope(&[1, 2], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn scaling_study_small() {
        let mut cfg = SolverConfig::zero_temperature(1, Some(100.0));
        cfg.w = 3;
        let opts = ScalingOptions { warmup: 1, samples: 2 };
        let t = scaling_study(ScalingTarget::Alg4, &[40, 80], &cfg, &opts).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.slope.is_finite());
        assert!(t.to_csv().starts_with("n,t_mean,t_median\n"));
        assert!(scaling_study(ScalingTarget::Alg4, &[80, 40], &cfg, &opts).is_err());
        let k = scaling_study(ScalingTarget::EigenThreshold, &[40, 80], &cfg, &opts).unwrap();
        assert!(k.rows.iter().all(|r| r.t_median > 0.0));
    }
}
