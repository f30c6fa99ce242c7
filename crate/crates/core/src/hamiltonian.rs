//! Periodic finite-difference Hamiltonians `H = -1/2 Laplacian + V` on a 1D ring.

use serde::{Deserialize, Serialize};

use crate::banded::BandedSymMatrix;
use crate::error::{LdmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Free,
    KronigPenney,
}

/// Inverted-Gaussian wells `V(x) = -V0 sum_j exp(-(x - x_j)^2 / delta^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub v0: f64,
    pub delta: f64,
    pub centers: Vec<f64>,
}

impl PotentialSpec {
    pub fn free() -> Self {
        Self { kind: PotentialKind::Free, v0: 0.0, delta: 1.0, centers: Vec::new() }
    }

    /// `n_at` wells at `x_j = L j / (n_at + 1)`, `j = 1..=n_at`.
    pub fn kronig_penney(v0: f64, delta: f64, n_at: usize, length: f64) -> Self {
        let centers = (1..=n_at).map(|j| length * j as f64 / (n_at + 1) as f64).collect();
        Self { kind: PotentialKind::KronigPenney, v0, delta, centers }
    }

    pub fn n_at(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == PotentialKind::KronigPenney {
            if !(self.delta > 0.0) {
                return Err(LdmError::Parameter(format!("well width delta must be positive, got {}", self.delta)));
            }
            if !(self.v0 >= 0.0) {
                return Err(LdmError::Parameter(format!("well depth V0 must be nonnegative, got {}", self.v0)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub length: f64,
    pub n: usize,
}

impl DomainSpec {
    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Grid point `x_i = (i + 1) h`.
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h()
    }
}

pub fn kp_potential(x: f64, spec: &PotentialSpec) -> f64 {
    match spec.kind {
        PotentialKind::Free => 0.0,
        PotentialKind::KronigPenney => {
            let d2 = spec.delta * spec.delta;
            -spec.v0 * spec.centers.iter().map(|c| (-(x - c) * (x - c) / d2).exp()).sum::<f64>()
        }
    }
}

/// Central-difference Hamiltonian with periodic wrap: `H_ii = 1/h^2 + V(x_i)`,
/// `H_{i,i+-1} = -1/(2 h^2)`.
pub fn build_hamiltonian(dom: &DomainSpec, pot: &PotentialSpec) -> Result<BandedSymMatrix> {
    if dom.n < 3 {
        return Err(LdmError::Parameter(format!("need at least 3 grid points, got {}", dom.n)));
    }
    if !(dom.length > 0.0) {
        return Err(LdmError::Parameter(format!("domain length must be positive, got {}", dom.length)));
    }
    pot.validate()?;
    let h = dom.h();
    let mut m = BandedSymMatrix::zeros(dom.n, 1)?;
    for (i, d) in m.diagonal_mut(0).iter_mut().enumerate() {
        *d = 1.0 / (h * h) + kp_potential(dom.x(i), pot);
    }
    m.diagonal_mut(1).fill(-0.5 / (h * h));
    Ok(m)
}
