//! Localized density matrices by l1-regularized convex minimization.
//!
//! Dense reference solvers use full eigendecompositions; the banded solvers
//! keep every iterate inside a cyclic band and evaluate matrix functions by
//! Chebyshev polynomials, so each iteration costs time linear in the matrix size.

pub mod banded;
pub mod bregman;
pub mod chebyshev;
pub mod dense;
pub mod energy;
pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod metrics;

pub use banded::{band_multiply, cyclic_dist, BandedSymMatrix, PowerOptions, SpectralInterval};
pub use bregman::{SolveReport, SolverConfig, Termination};
pub use dense::DenseMatrix;
pub use energy::EnergyBreakdown;
pub use error::{LdmError, Result};
