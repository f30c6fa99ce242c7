//! Exact spectral reference machinery at cubic cost.

use nalgebra::{DMatrix, DVector};

use crate::error::{LdmError, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Eigenpairs sorted by ascending eigenvalue; eigenvectors are the columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DenseMatrix,
}

impl Spectrum {
    /// `V diag(f(lambda)) V^T`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let weights: DVector<f64> = self.values.map(f);
        let mut scaled = self.vectors.clone();
        for (mut col, w) in scaled.column_iter_mut().zip(weights.iter()) {
            col *= *w;
        }
        let out = &scaled * self.vectors.transpose();
        symmetrize(out)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn symmetrize(m: DenseMatrix) -> DenseMatrix {
    let t = m.transpose();
    (m + t) * 0.5
}

pub fn max_asymmetry(m: &DenseMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn eig_sym(m: &DenseMatrix) -> Result<Spectrum> {
    if m.nrows() != m.ncols() {
        return Err(LdmError::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > 1e-10 * scale {
        return Err(LdmError::Parameter(format!("matrix is not symmetric (max |M - M^T| = {asym:e})")));
    }
    let n = m.nrows();
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| LdmError::Parameter(format!("eigendecomposition failed: {e:?}")))?;
    let (s, u) = (eig.S().column_vector(), eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| s[k]));
    let vectors = DenseMatrix::from_fn(n, n, |i, c| u[(i, order[c])]);
    Ok(Spectrum { values, vectors })
}

/// Tolerance below which `lambda_{N+1} - lambda_N` counts as degenerate.
pub fn gap_tolerance(spec: &Spectrum) -> f64 {
    1e-10 * spec.values[spec.len() - 1].abs().max(1.0)
}

/// Projector onto the `n_occ` lowest eigenvectors of `h`.
pub fn projector_density_matrix(h: &DenseMatrix, n_occ: usize) -> Result<DenseMatrix> {
    let spec = eig_sym(h)?;
    projector_from_spectrum(&spec, n_occ)
}

pub fn projector_from_spectrum(spec: &Spectrum, n_occ: usize) -> Result<DenseMatrix> {
    let n = spec.len();
    if n_occ > n {
        return Err(LdmError::Parameter(format!("occupation {n_occ} exceeds dimension {n}")));
    }
    if n_occ > 0 && n_occ < n {
        let gap = spec.values[n_occ] - spec.values[n_occ - 1];
        if gap < gap_tolerance(spec) {
            return Err(LdmError::Degenerate(format!(
                "lambda_{} = lambda_{} within {gap:e}; the occupied subspace is not unique",
                n_occ,
                n_occ + 1
            )));
        }
    }
    let occ = spec.vectors.columns(0, n_occ);
    Ok(symmetrize(&occ * occ.transpose()))
}

/// Fermi-Dirac occupation `1 / (1 + exp(beta x))` without overflow.
#[inline]
pub fn fermi_occupation(x: f64, beta: f64) -> f64 {
    let t = beta * x;
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

#[cfg(test)]
fn occupation_sum(values: &[f64], beta: f64, mu: f64) -> f64 {
    values.iter().map(|&l| fermi_occupation(l - mu, beta)).sum()
}

/// `occupation_sum - n_occ` arranged so that only small terms are summed:
/// states below `mu` contribute `1 - rho_i`, states above contribute `rho_i`.
/// Keeps the sign well defined deep inside a gap at large `beta`.
fn occupation_residual(values: &[f64], beta: f64, mu: f64, n_occ: f64) -> f64 {
    let mut below = 0usize;
    let mut holes = 0.0;
    let mut particles = 0.0;
    for &l in values {
        if l <= mu {
            below += 1;
            holes += fermi_occupation(mu - l, beta);
        } else {
            particles += fermi_occupation(l - mu, beta);
        }
    }
    (below as f64 - n_occ) + (particles - holes)
}

/// Chemical potential `mu` with `sum_i 1/(1 + exp(beta (lambda_i - mu))) = n_occ`,
/// found by bisection on `[lambda_1 - 10/beta, lambda_n + 10/beta]`.
pub fn chemical_potential(values: &[f64], beta: f64, n_occ: f64) -> Result<f64> {
    let n = values.len();
    if !(n_occ > 0.0 && n_occ < n as f64) {
        return Err(LdmError::Parameter(format!("occupation {n_occ} must lie in (0, {n})")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(LdmError::Parameter(format!("inverse temperature must be positive and finite, got {beta}")));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let residual = |mu: f64| occupation_residual(values, beta, mu, n_occ);
    let mut lo = min - 10.0 / beta;
    let mut hi = max + 10.0 / beta;
    // the bracket must straddle the root; widen for extreme occupations
    while residual(lo) > 0.0 {
        lo -= (hi - lo).max(1.0);
    }
    while residual(hi) < 0.0 {
        hi += (hi - lo).max(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = residual(mid);
        if r == 0.0 {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn occupations(values: &[f64], beta: f64, mu: f64) -> Vec<f64> {
    values.iter().map(|&l| fermi_occupation(l - mu, beta)).collect()
}

/// `[1 + exp(beta (H - mu))]^{-1}` with `mu` fixing the trace to `n_occ`.
pub fn fermi_dirac_density_matrix(h: &DenseMatrix, beta: f64, n_occ: f64) -> Result<(DenseMatrix, f64)> {
    let spec = eig_sym(h)?;
    fermi_dirac_from_spectrum(&spec, beta, n_occ)
}

pub fn fermi_dirac_from_spectrum(spec: &Spectrum, beta: f64, n_occ: f64) -> Result<(DenseMatrix, f64)> {
    let mu = chemical_potential(spec.values.as_slice(), beta, n_occ)?;
    Ok((spec.apply(|l| fermi_occupation(l - mu, beta)), mu))
}

/// `phi_beta(M) = [1 + exp(beta M)]^{-1}` with no chemical potential shift.
pub fn fermi_dirac_matrix_function(m: &DenseMatrix, beta: f64) -> Result<DenseMatrix> {
    Ok(eig_sym(m)?.apply(|x| fermi_occupation(x, beta)))
}

/// Frobenius projection onto `{0 <= R <= I}`: clamps eigenvalues into `[0, 1]`.
pub fn eigenvalue_threshold(m: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(eig_sym(m)?.apply(|x| x.clamp(0.0, 1.0)))
}
