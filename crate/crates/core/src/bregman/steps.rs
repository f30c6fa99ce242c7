//! Sub-problem solvers of the split-Bregman iterations.

use crate::banded::soft_threshold;
use crate::error::{LdmError, Result};

use super::ops::{SpectralBackend, SymOps};

/// Entrywise soft-threshold of a vector.
pub fn shrink_vec(x: &[f64], t: f64) -> Vec<f64> {
    x.iter().map(|&v| soft_threshold(v, t)).collect()
}

/// Entrywise soft-threshold of a matrix, the proximal map of `t |||.|||_1`.
pub fn shrink<M: SymOps>(x: &M, t: f64) -> M {
    x.shrink(t)
}

/// Shrinkage threshold `1 / (scale * eta)`; zero when `eta` is infinite.
pub(crate) fn l1_threshold(eta: Option<f64>, scale: f64) -> f64 {
    eta.map_or(0.0, |e| 1.0 / (scale * e))
}

/// Zero-temperature P-update.
///
/// `Gamma = lambda/(lambda+r) (Q - B) + r/(lambda+r) (R - D) - H/(lambda+r)`,
/// then `P = Gamma - ((tr Gamma - N)/n) I`, the Frobenius projection of
/// `Gamma` onto `{tr P = N}`.
#[allow(clippy::too_many_arguments)]
pub fn p_update_zero_t<M: SymOps>(q: &M, b: &M, r_mat: &M, d: &M, h: &M, lambda: f64, r: f64, n_occ: f64) -> M {
    let s = lambda + r;
    let mut gamma = q.clone();
    gamma.axpy(-1.0, b);
    gamma.scale(lambda / s);
    gamma.axpy(r / s, r_mat);
    gamma.axpy(-r / s, d);
    gamma.axpy(-1.0 / s, h);
    let n = gamma.dim() as f64;
    let shift = (gamma.trace() - n_occ) / n;
    gamma.shift_diag(-shift);
    gamma
}

/// Inner Bregman iteration for
/// `min (1/eta) |q|_1 + (lambda/2) |q - m_d|^2  s.t.  sum q = N`.
///
/// Each sweep soft-thresholds, projects onto the hyperplane `sum v = N`, and
/// updates the multiplier. Returns the last hyperplane iterate `v`, so the
/// constraint holds to roundoff.
pub fn qd_inner_bregman(m_d: &[f64], eta: Option<f64>, lambda: f64, r: f64, n_occ: f64, iters: usize) -> Vec<f64> {
    let n = m_d.len() as f64;
    let s = lambda + r;
    let t = l1_threshold(eta, s);
    let project = |u: &mut Vec<f64>| {
        let shift = (u.iter().sum::<f64>() - n_occ) / n;
        u.iter_mut().for_each(|x| *x -= shift);
    };
    let mut v = m_d.to_vec();
    project(&mut v);
    let mut b = vec![0.0; m_d.len()];
    for _ in 0..iters.max(1) {
        let target: Vec<f64> = m_d
            .iter()
            .zip(v.iter().zip(&b))
            .map(|(m, (v, b))| lambda / s * m + r / s * (v - b))
            .collect();
        let q = shrink_vec(&target, t);
        let mut u: Vec<f64> = q.iter().zip(&b).map(|(q, b)| q + b).collect();
        project(&mut u);
        v = u;
        b.iter_mut().zip(q.iter().zip(&v)).for_each(|(b, (q, v))| *b += q - v);
    }
    v
}

/// Finite-temperature Q-update with `M = P + B`: the off-diagonal part is
/// soft-thresholded at `1/(lambda eta)`, the diagonal comes from
/// [`qd_inner_bregman`] and carries the trace constraint.
#[allow(clippy::too_many_arguments)]
pub fn q_update_finite_t<M: SymOps>(
    p: &M,
    b: &M,
    eta: Option<f64>,
    lambda: f64,
    r: f64,
    n_occ: f64,
    iters: usize,
) -> M {
    let mut m = p.clone();
    m.axpy(1.0, b);
    let mut q = m.shrink_offdiag(l1_threshold(eta, lambda));
    let qd = qd_inner_bregman(&m.diag(), eta, lambda, r, n_occ, iters);
    q.set_diag(&qd);
    q
}

/// Contraction factor `beta (lambda + r) / 4` of the P fixed-point map.
pub fn contraction_factor(beta: f64, lambda: f64, r: f64) -> f64 {
    beta * (lambda + r) / 4.0
}

/// Operands of the finite-temperature P-subproblem.
#[derive(Debug, Clone, Copy)]
pub struct PSubproblem<'a, M> {
    pub h: &'a M,
    pub q: &'a M,
    pub b: &'a M,
    pub r_mat: &'a M,
    pub d: &'a M,
    pub beta: f64,
    pub lambda: f64,
    pub r: f64,
}

impl<M: SymOps> PSubproblem<'_, M> {
    /// `Y(Z) = H + lambda (Z - Q + B) + r (Z - R + D)`.
    pub fn argument(&self, z: &M) -> M {
        let mut y = self.h.clone();
        y.axpy(self.lambda + self.r, z);
        y.axpy(-self.lambda, self.q);
        y.axpy(self.lambda, self.b);
        y.axpy(-self.r, self.r_mat);
        y.axpy(self.r, self.d);
        y
    }

    pub fn check_contraction(&self, allow_override: bool) -> Result<f64> {
        let q = contraction_factor(self.beta, self.lambda, self.r);
        if q >= 1.0 && !allow_override {
            return Err(LdmError::Config(format!(
                "beta (lambda + r) = {:.4} >= 4: the P fixed-point map is not a guaranteed contraction",
                4.0 * q
            )));
        }
        Ok(q)
    }

    /// Runs `iters` steps of `Z <- phi_beta(Y(Z))` from `z0`, returning every iterate.
    pub fn trajectory<B: SpectralBackend<Mat = M>>(&self, backend: &mut B, z0: &M, iters: usize) -> Result<Vec<M>> {
        let mut out = Vec::with_capacity(iters + 1);
        out.push(z0.clone());
        for _ in 0..iters {
            let y = self.argument(out.last().expect("nonempty"));
            out.push(backend.fermi_dirac(&y, self.beta)?);
        }
        Ok(out)
    }

    /// Runs `iters` fixed-point steps from `z0`.
    pub fn solve<B: SpectralBackend<Mat = M>>(&self, backend: &mut B, z0: &M, iters: usize) -> Result<M> {
        let mut z = z0.clone();
        for _ in 0..iters {
            let y = self.argument(&z);
            z = backend.fermi_dirac(&y, self.beta)?;
        }
        Ok(z)
    }
}

/// Finite-temperature P-update, convenience form of [`PSubproblem::solve`]
/// that enforces the contraction condition.
#[allow(clippy::too_many_arguments)]
pub fn p_subproblem_finite_t<M: SymOps, B: SpectralBackend<Mat = M>>(
    backend: &mut B,
    z0: &M,
    q: &M,
    b: &M,
    r_mat: &M,
    d: &M,
    h: &M,
    beta: f64,
    lambda: f64,
    r: f64,
    iters: usize,
    allow_override: bool,
) -> Result<M> {
    let sub = PSubproblem { h, q, b, r_mat, d, beta, lambda, r };
    sub.check_contraction(allow_override)?;
    sub.solve(backend, z0, iters)
}
