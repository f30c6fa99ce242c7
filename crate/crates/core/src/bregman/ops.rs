//! Matrix operations shared by the dense and banded solver paths.

use crate::banded::{soft_threshold, BandedSymMatrix};
use crate::chebyshev::{eigen_threshold_cheby, fermi_dirac_cheby, ChebOptions};
use crate::dense::{eigenvalue_threshold, fermi_dirac_matrix_function, DenseMatrix};
use crate::error::Result;

/// Symmetric matrix algebra needed by the split-Bregman loops.
///
/// Callers guarantee matching dimensions (and, for banded storage, a common
/// band); the solvers validate this once on entry.
pub trait SymOps: Clone {
    fn dim(&self) -> usize;
    fn trace(&self) -> f64;
    fn frobenius(&self) -> f64;
    fn l1(&self) -> f64;
    /// `sum_ij A_ij B_ij`.
    fn dot(&self, other: &Self) -> f64;
    /// `self += alpha * other`.
    fn axpy(&mut self, alpha: f64, other: &Self);
    fn scale(&mut self, alpha: f64);
    fn shift_diag(&mut self, c: f64);
    fn scaled_identity_like(&self, c: f64) -> Self;
    /// Entrywise soft-threshold.
    fn shrink(&self, t: f64) -> Self;
    /// Soft-threshold off the diagonal; the diagonal is copied unchanged.
    fn shrink_offdiag(&self, t: f64) -> Self;
    fn diag(&self) -> Vec<f64>;
    fn set_diag(&mut self, d: &[f64]);
}

impl SymOps for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn trace(&self) -> f64 {
        self.diagonal().sum()
    }

    fn frobenius(&self) -> f64 {
        self.norm()
    }

    fn l1(&self) -> f64 {
        self.iter().map(|x| x.abs()).sum()
    }

    fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        self.zip_apply(other, |a, b| *a += alpha * b);
    }

    fn scale(&mut self, alpha: f64) {
        *self *= alpha;
    }

    fn shift_diag(&mut self, c: f64) {
        for i in 0..self.nrows() {
            self[(i, i)] += c;
        }
    }

    fn scaled_identity_like(&self, c: f64) -> Self {
        DenseMatrix::identity(self.nrows(), self.ncols()) * c
    }

    fn shrink(&self, t: f64) -> Self {
        self.map(|x| soft_threshold(x, t))
    }

    fn shrink_offdiag(&self, t: f64) -> Self {
        let mut out = self.map(|x| soft_threshold(x, t));
        for i in 0..self.nrows() {
            out[(i, i)] = self[(i, i)];
        }
        out
    }

    fn diag(&self) -> Vec<f64> {
        self.diagonal().iter().copied().collect()
    }

    fn set_diag(&mut self, d: &[f64]) {
        for (i, v) in d.iter().enumerate() {
            self[(i, i)] = *v;
        }
    }
}

impl SymOps for BandedSymMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn trace(&self) -> f64 {
        BandedSymMatrix::trace(self)
    }

    fn frobenius(&self) -> f64 {
        self.frobenius_norm()
    }

    fn l1(&self) -> f64 {
        self.entrywise_l1()
    }

    fn dot(&self, other: &Self) -> f64 {
        BandedSymMatrix::dot(self, other).expect("matching dimensions")
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        self.axpy_assign(alpha, other).expect("matching dimensions");
    }

    fn scale(&mut self, alpha: f64) {
        BandedSymMatrix::scale(self, alpha);
    }

    fn shift_diag(&mut self, c: f64) {
        BandedSymMatrix::shift_diag(self, c);
    }

    fn scaled_identity_like(&self, c: f64) -> Self {
        let mut out = BandedSymMatrix::zeros(self.n(), self.w()).expect("valid shape");
        out.shift_diag(c);
        out
    }

    fn shrink(&self, t: f64) -> Self {
        self.map(|x| soft_threshold(x, t))
    }

    fn shrink_offdiag(&self, t: f64) -> Self {
        self.map_offdiag(|x| soft_threshold(x, t))
    }

    fn diag(&self) -> Vec<f64> {
        self.diagonal(0).to_vec()
    }

    fn set_diag(&mut self, d: &[f64]) {
        self.diagonal_mut(0).copy_from_slice(d);
    }
}

/// The two spectral operations of the solvers: clamping eigenvalues into
/// `[0, 1]`, and the Fermi-Dirac function `[I + exp(beta Y)]^{-1}`.
pub trait SpectralBackend {
    type Mat: SymOps;

    fn threshold(&mut self, m: &Self::Mat) -> Result<Self::Mat>;
    fn fermi_dirac(&mut self, y: &Self::Mat, beta: f64) -> Result<Self::Mat>;
}

/// Exact eigendecomposition-based operations.
#[derive(Debug, Default, Clone, Copy)]
pub struct DenseBackend;

impl SpectralBackend for DenseBackend {
    type Mat = DenseMatrix;

    fn threshold(&mut self, m: &DenseMatrix) -> Result<DenseMatrix> {
        eigenvalue_threshold(m)
    }

    fn fermi_dirac(&mut self, y: &DenseMatrix, beta: f64) -> Result<DenseMatrix> {
        fermi_dirac_matrix_function(y, beta)
    }
}

/// Chebyshev-polynomial operations projected back onto band `w`.
#[derive(Debug, Clone, Copy)]
pub struct ChebyshevBackend {
    pub w: usize,
    pub m_et: usize,
    pub m_fd: usize,
    pub opts: ChebOptions,
}

impl SpectralBackend for ChebyshevBackend {
    type Mat = BandedSymMatrix;

    fn threshold(&mut self, m: &BandedSymMatrix) -> Result<BandedSymMatrix> {
        Ok(eigen_threshold_cheby(m, self.m_et, &self.opts)?.truncate(self.w).widen(self.w)?)
    }

    fn fermi_dirac(&mut self, y: &BandedSymMatrix, beta: f64) -> Result<BandedSymMatrix> {
        fermi_dirac_cheby(y, beta, self.m_fd, self.w, &self.opts)
    }
}
