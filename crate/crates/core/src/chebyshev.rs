//! Chebyshev interpolants and their evaluation on banded matrices.
//!
//! A scalar function `f` on `[a, b]` is interpolated at the `m + 1`
//! Chebyshev points of the second kind after the affine map
//! `s(y) = 2 (y - a) / (b - a) - 1`. Matrix evaluation runs the Clenshaw
//! recurrence with every intermediate truncated to a working band.

use std::f64::consts::PI;

use crate::banded::{band_multiply, power_method_extremes, BandedSymMatrix, PowerOptions, SpectralInterval};
use crate::dense::fermi_occupation;
use crate::error::{LdmError, Result};

/// Intervals narrower than this are treated as a single point.
pub const DEGENERATE_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevApprox {
    pub coeffs: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl ChebyshevApprox {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Constant function on `[a, b]`.
    pub fn constant(c: f64, a: f64, b: f64) -> Self {
        Self { coeffs: vec![c], a, b }
    }

    pub fn is_degenerate(&self) -> bool {
        self.b - self.a < DEGENERATE_WIDTH
    }

    /// Affine map of `[a, b]` onto `[-1, 1]`.
    pub fn to_unit(&self, y: f64) -> f64 {
        2.0 * (y - self.a) / (self.b - self.a) - 1.0
    }

    pub fn from_unit(&self, x: f64) -> f64 {
        0.5 * (self.b - self.a) * x + 0.5 * (self.a + self.b)
    }

    pub fn contains(&self, y: f64) -> bool {
        self.a <= y && y <= self.b
    }

    /// Clenshaw evaluation. Points outside `[a, b]` are extrapolated.
    pub fn eval(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            return self.coeffs[0];
        }
        let x = self.to_unit(y);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + x * b1 - b2
    }

    /// Value plus whether `y` lay inside the fitted interval.
    pub fn eval_flagged(&self, y: f64) -> (f64, bool) {
        (self.eval(y), self.contains(y))
    }

    /// Multiplies the coefficients by Jackson damping factors.
    pub fn jackson_damped(&self) -> Self {
        let m1 = self.coeffs.len() as f64;
        let alpha = PI / m1;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let k = k as f64;
                let g = ((m1 - k) * (alpha * k).cos() + (alpha * k).sin() / alpha.tan()) / m1;
                c * g
            })
            .collect();
        Self { coeffs, a: self.a, b: self.b }
    }

    /// Largest `|f - approx|` on `samples` equispaced points of `[a, b]`.
    pub fn max_error(&self, f: impl Fn(f64) -> f64, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let y = self.a + (self.b - self.a) * i as f64 / (samples - 1) as f64;
                (f(y) - self.eval(y)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Degree-`m` interpolant of `f` on `[a, b]` at Chebyshev points of the second kind.
pub fn cheb_fit(f: impl Fn(f64) -> f64, m: usize, a: f64, b: f64) -> Result<ChebyshevApprox> {
    if m == 0 {
        return Err(LdmError::Parameter("Chebyshev degree must be at least 1".into()));
    }
    if !(b > a) {
        return Err(LdmError::Parameter(format!("empty interval [{a}, {b}]")));
    }
    let mf = m as f64;
    let samples: Vec<f64> = (0..=m)
        .map(|j| {
            let x = (PI * j as f64 / mf).cos();
            f(0.5 * (b - a) * x + 0.5 * (a + b))
        })
        .collect();
    let coeffs = (0..=m)
        .map(|k| {
            let mut s = 0.0;
            for (j, fj) in samples.iter().enumerate() {
                let half = if j == 0 || j == m { 0.5 } else { 1.0 };
                s += half * fj * (PI * (j * k) as f64 / mf).cos();
            }
            let c = 2.0 * s / mf;
            if k == 0 || k == m {
                0.5 * c
            } else {
                c
            }
        })
        .collect();
    Ok(ChebyshevApprox { coeffs, a, b })
}

pub fn cheb_eval_scalar(approx: &ChebyshevApprox, y: f64) -> f64 {
    approx.eval(y)
}

/// Default working band of the matrix Clenshaw recurrence.
pub fn default_work_width(m: usize, w: usize, n: usize) -> usize {
    (m * w).min(n / 2)
}

/// Evaluates `approx` at the banded matrix `m`.
///
/// Every Clenshaw term is truncated to `w_work` (raised to at least `w_out`);
/// the result is truncated to `w_out`. With `w_work >= degree * w(m)` the
/// recurrence is exact up to the final truncation.
pub fn cheb_eval_matrix(
    approx: &ChebyshevApprox,
    m: &BandedSymMatrix,
    w_out: usize,
    w_work: usize,
) -> Result<BandedSymMatrix> {
    let n = m.n();
    let w_out = w_out.min(n / 2);
    if approx.is_degenerate() || approx.coeffs.len() == 1 {
        return BandedSymMatrix::scaled_identity(n, approx.coeffs[0])?.widen(w_out);
    }
    let w_work = w_work.max(w_out).min(n / 2);

    // x = s(M) = 2/(b-a) M - (a+b)/(b-a) I
    let mut x = m.scaled(2.0 / (approx.b - approx.a));
    x.shift_diag(-(approx.a + approx.b) / (approx.b - approx.a));

    let mut b1 = BandedSymMatrix::zeros(n, 0)?;
    let mut b2 = BandedSymMatrix::zeros(n, 0)?;
    for &c in approx.coeffs.iter().skip(1).rev() {
        let mut b0 = band_multiply(&x, &b1, w_work)?;
        b0.scale(2.0);
        b0.axpy_assign(-1.0, &b2)?;
        b0.shift_diag(c);
        b2 = b1;
        b1 = b0;
    }
    let mut out = band_multiply(&x, &b1, w_work)?;
    out.axpy_assign(-1.0, &b2)?;
    out.shift_diag(approx.coeffs[0]);
    Ok(out.truncate(w_out))
}

/// Knobs shared by the Chebyshev matrix-function kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebOptions {
    /// Working band of the recurrence; `None` means `min(m w, n/2)`.
    pub w_work: Option<usize>,
    pub jackson: bool,
    pub power: PowerOptions,
}

impl Default for ChebOptions {
    fn default() -> Self {
        Self { w_work: None, jackson: false, power: PowerOptions::default() }
    }
}

/// `h(x) = min(max(x, 0), 1)`.
pub fn hard_threshold(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Applies the scalar function `f` to `m` through a degree-`deg` Chebyshev
/// fit on a power-method estimate of its spectrum.
pub fn matrix_function_cheby(
    m: &BandedSymMatrix,
    f: impl Fn(f64) -> f64,
    deg: usize,
    w_out: usize,
    opts: &ChebOptions,
) -> Result<(BandedSymMatrix, SpectralInterval)> {
    let interval = power_method_extremes(m, &opts.power)?;
    let approx = if interval.hi - interval.lo < DEGENERATE_WIDTH {
        ChebyshevApprox::constant(f(0.5 * (interval.lo + interval.hi)), interval.lo, interval.hi)
    } else {
        let fit = cheb_fit(&f, deg, interval.lo, interval.hi)?;
        if opts.jackson {
            fit.jackson_damped()
        } else {
            fit
        }
    };
    let w_work = opts.w_work.unwrap_or_else(|| default_work_width(deg, m.w().max(1), m.n()));
    Ok((cheb_eval_matrix(&approx, m, w_out, w_work)?, interval))
}

/// Banded approximation of eigenvalue clamping to `[0, 1]`; output keeps the input band.
pub fn eigen_threshold_cheby(p: &BandedSymMatrix, m_et: usize, opts: &ChebOptions) -> Result<BandedSymMatrix> {
    Ok(matrix_function_cheby(p, hard_threshold, m_et, p.w(), opts)?.0)
}

/// Banded approximation of `[I + exp(beta Y)]^{-1}` truncated to `w_out`.
pub fn fermi_dirac_cheby(
    y: &BandedSymMatrix,
    beta: f64,
    m_fd: usize,
    w_out: usize,
    opts: &ChebOptions,
) -> Result<BandedSymMatrix> {
    if !(beta > 0.0) {
        return Err(LdmError::Parameter(format!("inverse temperature must be positive, got {beta}")));
    }
    Ok(matrix_function_cheby(y, |x| fermi_occupation(x, beta), m_fd, w_out, opts)?.0)
}
