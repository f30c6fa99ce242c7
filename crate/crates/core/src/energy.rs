//! Energy functionals: band energy, Fermi-Dirac entropy, l1 penalty.

use serde::{Deserialize, Serialize};

use crate::banded::BandedSymMatrix;
use crate::dense::{eig_sym, DenseMatrix};
use crate::error::{check_dim, LdmError, Result};

/// Largest excursion outside `[0, 1]` tolerated by [`fermi_dirac_entropy`].
pub const SPECTRUM_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub band_energy: f64,
    pub entropy_term: f64,
    pub l1_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(band_energy: f64, entropy_term: f64, l1_term: f64) -> Self {
        Self { band_energy, entropy_term, l1_term, total: band_energy + entropy_term + l1_term }
    }
}

/// `x ln x + (1 - x) ln(1 - x)` with `0 ln 0 = 0`.
pub fn entropy_density(x: f64) -> f64 {
    let term = |y: f64| if y <= 0.0 { 0.0 } else { y * y.ln() };
    term(x) + term(1.0 - x)
}

fn entropy_from_eigenvalues(values: impl Iterator<Item = f64>) -> f64 {
    values.map(|x| entropy_density(x.clamp(0.0, 1.0))).sum()
}

/// `tr phi(P)` evaluated spectrally. Fails if the spectrum leaves
/// `[-SPECTRUM_SLACK, 1 + SPECTRUM_SLACK]`.
pub fn fermi_dirac_entropy(p: &DenseMatrix) -> Result<f64> {
    let spec = eig_sym(p)?;
    let lo = spec.values[0];
    let hi = spec.values[spec.len() - 1];
    if lo < -SPECTRUM_SLACK || hi > 1.0 + SPECTRUM_SLACK {
        return Err(LdmError::Constraint(format!(
            "density matrix spectrum [{lo:e}, {hi:e}] leaves [0, 1]"
        )));
    }
    Ok(entropy_from_eigenvalues(spec.values.iter().copied()))
}

/// Like [`fermi_dirac_entropy`] but clamps any spectrum into `[0, 1]`,
/// returning the largest excursion alongside the value.
pub fn fermi_dirac_entropy_projected(p: &DenseMatrix) -> Result<(f64, f64)> {
    let spec = eig_sym(p)?;
    let excursion = spec
        .values
        .iter()
        .map(|&x| (-x).max(x - 1.0).max(0.0))
        .fold(0.0, f64::max);
    Ok((entropy_from_eigenvalues(spec.values.iter().copied()), excursion))
}

pub fn entrywise_l1(m: &DenseMatrix) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

/// `tr(HP)` for symmetric `H`, `P`.
pub fn band_energy(h: &DenseMatrix, p: &DenseMatrix) -> Result<f64> {
    check_dim(h.nrows(), p.nrows())?;
    Ok(h.dot(p))
}

/// `E_{beta,eta}(P) = tr(HP) + (1/beta) tr phi(P) + (1/eta) |||P|||_1`.
/// `None` stands for an infinite parameter, whose term is dropped.
pub fn evaluate(h: &DenseMatrix, p: &DenseMatrix, beta: Option<f64>, eta: Option<f64>) -> Result<EnergyBreakdown> {
    let band = band_energy(h, p)?;
    let entropy = match beta {
        Some(b) => fermi_dirac_entropy(p)? / b,
        None => 0.0,
    };
    let l1 = eta.map_or(0.0, |e| entrywise_l1(p) / e);
    Ok(EnergyBreakdown::new(band, entropy, l1))
}

/// As [`evaluate`], with the entropy spectrum clamped into `[0, 1]` for
/// approximate iterates. Returns the spectral excursion too.
pub fn evaluate_projected(
    h: &DenseMatrix,
    p: &DenseMatrix,
    beta: Option<f64>,
    eta: Option<f64>,
) -> Result<(EnergyBreakdown, f64)> {
    let band = band_energy(h, p)?;
    let (entropy, excursion) = match beta {
        Some(b) => {
            let (s, ex) = fermi_dirac_entropy_projected(p)?;
            (s / b, ex)
        }
        None => (0.0, 0.0),
    };
    let l1 = eta.map_or(0.0, |e| entrywise_l1(p) / e);
    Ok((EnergyBreakdown::new(band, entropy, l1), excursion))
}

/// Banded counterpart of [`evaluate`]; densifies only when the entropy is needed.
pub fn evaluate_banded(
    h: &BandedSymMatrix,
    p: &BandedSymMatrix,
    beta: Option<f64>,
    eta: Option<f64>,
) -> Result<EnergyBreakdown> {
    let band = h.dot(p)?;
    let entropy = match beta {
        Some(b) => fermi_dirac_entropy(&p.to_dense())? / b,
        None => 0.0,
    };
    let l1 = eta.map_or(0.0, |e| p.entrywise_l1() / e);
    Ok(EnergyBreakdown::new(band, entropy, l1))
}
