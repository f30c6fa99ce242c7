//! Symmetric matrices with a cyclic band structure.
//!
//! Entry `(i, j)` may be nonzero only when the cyclic distance
//! `min(|i - j|, n - |i - j|)` is at most the half-width `w`. Storage is
//! diagonal-major: the main diagonal followed by `w` cyclic
//! super-diagonals, so diagonal `d` holds `(i, (i + d) mod n)` at slot `i`.
//! Sub-diagonals are implied by symmetry.

use std::cell::Cell;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dim, LdmError, Result};

thread_local! {
    static BAND_OPS: Cell<u64> = const { Cell::new(0) };
}

/// Multiply-add count of banded kernels issued from the current thread.
pub fn band_op_count() -> u64 {
    BAND_OPS.with(|c| c.get())
}

pub fn reset_band_op_count() {
    BAND_OPS.with(|c| c.set(0));
}

fn add_band_ops(k: u64) {
    BAND_OPS.with(|c| c.set(c.get().wrapping_add(k)));
}

/// Cyclic distance between two indices on a ring of `n` sites.
pub fn cyclic_dist(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

/// Distinct signed cyclic offsets with `|offset| <= w`.
fn offsets(w: usize, n: usize) -> std::ops::RangeInclusive<isize> {
    let w = w as isize;
    let lo = if 2 * w == n as isize { -w + 1 } else { -w };
    lo..=w
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymMatrix {
    n: usize,
    w: usize,
    bands: Vec<f64>,
}

impl BandedSymMatrix {
    pub fn zeros(n: usize, w: usize) -> Result<Self> {
        if n == 0 {
            return Err(LdmError::Parameter("matrix dimension must be positive".into()));
        }
        if w > n / 2 {
            return Err(LdmError::Parameter(format!(
                "band width {w} exceeds floor(n/2) = {} for n = {n}",
                n / 2
            )));
        }
        Ok(Self { n, w, bands: vec![0.0; (w + 1) * n] })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Result<Self> {
        let mut m = Self::zeros(n, 0)?;
        m.bands.fill(c);
        Ok(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len(), 0)?;
        m.bands.copy_from_slice(diag);
        Ok(m)
    }

    /// Builds the band-`w` truncation of a dense symmetric matrix. Only the
    /// upper cyclic band is read.
    pub fn from_dense(m: &DMatrix<f64>, w: usize) -> Result<Self> {
        let n = m.nrows();
        check_dim(n, m.ncols())?;
        let mut out = Self::zeros(n, w)?;
        for d in 0..=w {
            for i in 0..n {
                out.bands[d * n + i] = m[(i, (i + d) % n)];
            }
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// Stored diagonal `d` (entries `(i, i + d mod n)` for `i = 0..n`).
    pub fn diagonal(&self, d: usize) -> &[f64] {
        &self.bands[d * self.n..(d + 1) * self.n]
    }

    pub fn diagonal_mut(&mut self, d: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.bands[d * n..(d + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        let d = (j + n - i) % n;
        if d <= self.w {
            self.bands[d * n + i]
        } else if n - d <= self.w {
            self.bands[(n - d) * n + j]
        } else {
            0.0
        }
    }

    /// Sets `(i, j)` and its mirror. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        let d = (j + n - i) % n;
        assert!(
            cyclic_dist(i, j, n) <= self.w,
            "entry ({i}, {j}) lies outside band {}",
            self.w
        );
        if d <= self.w {
            self.bands[d * n + i] = v;
        }
        if n - d <= self.w {
            self.bands[(n - d) % n * n + j] = v;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for d in 0..=self.w {
            for i in 0..n {
                let j = (i + d) % n;
                let v = self.bands[d * n + i];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Re-expresses the matrix with a wider storage band (zero-padded).
    pub fn widen(&self, w: usize) -> Result<Self> {
        if w < self.w {
            return Ok(self.truncate(w));
        }
        let mut out = Self::zeros(self.n, w)?;
        out.bands[..self.bands.len()].copy_from_slice(&self.bands);
        Ok(out)
    }

    /// Frobenius-nearest member of the band-`w` set: drops diagonals beyond `w`.
    /// A wider `w` than stored returns a zero-padded copy.
    pub fn truncate(&self, w: usize) -> Self {
        if w >= self.w {
            return self.widen(w.min(self.n / 2)).expect("width within range");
        }
        Self { n: self.n, w, bands: self.bands[..(w + 1) * self.n].to_vec() }
    }

    /// Weight of a stored diagonal when summing over the full matrix. The
    /// antipodal diagonal `d = n/2` of an even ring stores each entry once.
    fn weight(&self, d: usize) -> f64 {
        if d == 0 || 2 * d == self.n {
            1.0
        } else {
            2.0
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal(0).iter().sum()
    }

    /// Frobenius inner product `sum_ij A_ij B_ij`, equal to `tr(AB)` for symmetric inputs.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        check_dim(self.n, other.n)?;
        let n = self.n;
        let mut s = 0.0;
        for d in 0..=self.w.min(other.w) {
            let part: f64 = self.bands[d * n..(d + 1) * n]
                .iter()
                .zip(&other.bands[d * n..(d + 1) * n])
                .map(|(a, b)| a * b)
                .sum();
            s += self.weight(d) * part;
        }
        Ok(s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        let n = self.n;
        (0..=self.w)
            .map(|d| self.weight(d) * self.bands[d * n..(d + 1) * n].iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Entrywise l1 norm over the full matrix.
    pub fn entrywise_l1(&self) -> f64 {
        let n = self.n;
        (0..=self.w)
            .map(|d| self.weight(d) * self.bands[d * n..(d + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.bands.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scale(&mut self, a: f64) {
        self.bands.iter_mut().for_each(|x| *x *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn shift_diag(&mut self, c: f64) {
        self.diagonal_mut(0).iter_mut().for_each(|x| *x += c);
    }

    /// `self += alpha * other`, widening storage when `other` is wider.
    pub fn axpy_assign(&mut self, alpha: f64, other: &Self) -> Result<()> {
        check_dim(self.n, other.n)?;
        if other.w > self.w {
            *self = self.widen(other.w)?;
        }
        self.bands[..other.bands.len()]
            .iter_mut()
            .zip(&other.bands)
            .for_each(|(s, o)| *s += alpha * o);
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { n: self.n, w: self.w, bands: self.bands.iter().map(|&x| f(x)).collect() }
    }

    /// Applies `f` to the off-diagonal bands only.
    pub fn map_offdiag(&self, f: impl Fn(f64) -> f64) -> Self {
        let n = self.n;
        let mut out = self.clone();
        out.bands[n..].iter_mut().for_each(|x| *x = f(*x));
        out
    }

    /// Row `i` laid out as offsets `-w..=w` in `n x (2w + 1)` storage. When
    /// `2w = n` the offset `-w` duplicates `+w` and is stored as zero.
    fn row_major(&self) -> Vec<f64> {
        let (n, w) = (self.n, self.w);
        let len = 2 * w + 1;
        let mut out = vec![0.0; n * len];
        let skip_first = 2 * w == n;
        for i in 0..n {
            let row = &mut out[i * len..(i + 1) * len];
            for (s, dst) in row.iter_mut().enumerate() {
                if s == 0 && skip_first {
                    continue;
                }
                let t = s as isize - w as isize;
                *dst = if t >= 0 {
                    self.bands[t as usize * n + i]
                } else {
                    self.bands[(-t) as usize * n + wrap(i as isize + t, n)]
                };
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let n = self.n;
        let mut y: Vec<f64> = self.diagonal(0).iter().zip(x).map(|(a, b)| a * b).collect();
        for d in 1..=self.w {
            let band = self.diagonal(d);
            let antipodal = 2 * d == n;
            for i in 0..n {
                let j = (i + d) % n;
                y[i] += band[i] * x[j];
                if !antipodal {
                    y[j] += band[i] * x[i];
                }
            }
        }
        add_band_ops((n * (2 * self.w + 1)) as u64);
        Ok(y)
    }

    /// Absolute row sums and diagonal, for Gershgorin discs.
    fn gershgorin_interval(&self) -> (f64, f64) {
        let n = self.n;
        let mut radius = vec![0.0; n];
        for d in 1..=self.w {
            let band = self.diagonal(d);
            let antipodal = 2 * d == n;
            for i in 0..n {
                let a = band[i].abs();
                radius[i] += a;
                if !antipodal {
                    radius[(i + d) % n] += a;
                }
            }
        }
        let diag = self.diagonal(0);
        let lo = (0..n).map(|i| diag[i] - radius[i]).fold(f64::INFINITY, f64::min);
        let hi = (0..n).map(|i| diag[i] + radius[i]).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Returns `A + alpha * B`.
pub fn band_axpy(alpha: f64, a: &BandedSymMatrix, b: &BandedSymMatrix) -> Result<BandedSymMatrix> {
    let mut out = a.clone();
    out.axpy_assign(alpha, b)?;
    Ok(out)
}

/// Product of two banded symmetric matrices restricted to band
/// `min(w_a + w_b, w_cap)`.
///
/// The returned matrix is the symmetric part `(AB + BA) / 2`, which equals
/// `AB` whenever the factors commute (polynomials in a common matrix, or
/// circulants). Each row is summed in a fixed order, so results do not
/// depend on the thread count.
pub fn band_multiply(a: &BandedSymMatrix, b: &BandedSymMatrix, w_cap: usize) -> Result<BandedSymMatrix> {
    check_dim(a.n, b.n)?;
    let n = a.n;
    let wc = (a.w + b.w).min(w_cap).min(n / 2);
    let span = a.w + b.w;
    let a_rows = a.row_major();
    let b_rows = b.row_major();
    let (la, lb) = (2 * a.w + 1, 2 * b.w + 1);
    let row_len = 2 * wc + 1;
    let mut rows = vec![0.0; n * row_len];

    // acc[t + span] holds offset t in [-span, span]; offsets beyond the ring fold back
    rows.par_chunks_mut(row_len).enumerate().for_each_init(
        || (vec![0.0; 2 * span + 1], vec![0.0; n]),
        |(acc, ring), (i, row)| {
            acc.fill(0.0);
            let a_row = &a_rows[i * la..(i + 1) * la];
            for (sa, &a_ik) in a_row.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let k = wrap(i as isize + sa as isize - a.w as isize, n);
                let b_row = &b_rows[k * lb..(k + 1) * lb];
                for (dst, &b_kj) in acc[sa..sa + lb].iter_mut().zip(b_row) {
                    *dst += a_ik * b_kj;
                }
            }
            if 2 * span < n {
                row.copy_from_slice(&acc[span - wc..span + wc + 1]);
            } else {
                ring.fill(0.0);
                for (t, v) in acc.iter().enumerate() {
                    ring[wrap(t as isize - span as isize, n)] += v;
                }
                for (t, dst) in row.iter_mut().enumerate() {
                    *dst = ring[wrap(t as isize - wc as isize, n)];
                }
            }
        },
    );
    add_band_ops((n * offsets(a.w, n).count() * offsets(b.w, n).count()) as u64);

    let mut out = BandedSymMatrix::zeros(n, wc)?;
    for d in 0..=wc {
        for i in 0..n {
            let j = (i + d) % n;
            let upper = rows[i * row_len + wc + d];
            let lower = rows[j * row_len + wc - d];
            out.bands[d * n + i] = 0.5 * (upper + lower);
        }
    }
    Ok(out)
}

/// Soft-threshold `sign(x) max(|x| - t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    /// Relative change of the Rayleigh quotient that counts as converged.
    pub tol: f64,
    pub max_it: usize,
    /// Fraction of the estimated spectral width added on each side.
    pub margin: f64,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_it: 200, margin: 0.05, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInterval {
    pub lo: f64,
    pub hi: f64,
    /// False when either power sweep hit `max_it` before meeting `tol`.
    pub converged: bool,
}

impl SpectralInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Dominant eigenvalue of `shift * I + sign * M`, assumed positive semidefinite.
fn power_sweep(m: &BandedSymMatrix, shift: f64, sign: f64, opts: &PowerOptions) -> Result<(f64, bool)> {
    let n = m.n;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut rq = f64::NAN;
    for _ in 0..opts.max_it {
        let mv = m.matvec(&v)?;
        let y: Vec<f64> = mv.iter().zip(&v).map(|(a, x)| sign * a + shift * x).collect();
        let next_rq: f64 = y.iter().zip(&v).map(|(a, b)| a * b).sum();
        let ny = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        if ny == 0.0 {
            return Ok((0.0, true));
        }
        v = y.into_iter().map(|x| x / ny).collect();
        if (next_rq - rq).abs() <= opts.tol * next_rq.abs().max(1.0) {
            return Ok((next_rq, true));
        }
        rq = next_rq;
    }
    Ok((rq, false))
}

/// Estimates an interval that contains the spectrum of `m`.
///
/// The largest eigenvalue comes from power iteration on `m + g I`, where `g`
/// is a Gershgorin bound making the operator positive semidefinite; the
/// smallest from power iteration on `lambda_max I - m`. The estimate is widened by
/// `margin` times its width on both sides and then clipped to the
/// Gershgorin interval, which always contains the spectrum.
pub fn power_method_extremes(m: &BandedSymMatrix, opts: &PowerOptions) -> Result<SpectralInterval> {
    if opts.margin < 0.0 {
        return Err(LdmError::Parameter("power method margin must be nonnegative".into()));
    }
    let (g_lo, g_hi) = m.gershgorin_interval();
    let g = g_lo.abs().max(g_hi.abs());
    if g == 0.0 {
        return Ok(SpectralInterval { lo: 0.0, hi: 0.0, converged: true });
    }
    let (top, ok_top) = power_sweep(m, g, 1.0, opts)?;
    let lambda_max = top - g;
    let (bottom, ok_bottom) = power_sweep(m, lambda_max, -1.0, opts)?;
    let lambda_min = lambda_max - bottom;

    let width = (lambda_max - lambda_min).max(0.0);
    let lo = (lambda_min - opts.margin * width).max(g_lo);
    let hi = (lambda_max + opts.margin * width).min(g_hi);
    Ok(SpectralInterval { lo, hi, converged: ok_top && ok_bottom })
}
