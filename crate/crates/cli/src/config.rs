//! Flat key/value run configuration (JSON), mapped onto the core types.

use std::path::Path;

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use ldm_core::bregman::SolverConfig;
use ldm_core::hamiltonian::{build_hamiltonian, DomainSpec, PotentialKind, PotentialSpec};
use ldm_core::BandedSymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Dense zero temperature.
    Alg1,
    /// Dense finite temperature.
    Alg2,
    /// Banded zero temperature.
    Alg4,
    /// Banded finite temperature.
    Alg5,
}

impl SolverKind {
    pub fn finite_temperature(self) -> bool {
        matches!(self, SolverKind::Alg2 | SolverKind::Alg5)
    }

    pub fn banded(self) -> bool {
        matches!(self, SolverKind::Alg4 | SolverKind::Alg5)
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Alg1 => "alg1",
            SolverKind::Alg2 => "alg2",
            SolverKind::Alg4 => "alg4",
            SolverKind::Alg5 => "alg5",
        }
    }
}

/// Every key is optional in the file; missing keys take the defaults below.
/// `eta: null` means an infinite `eta`. `beta` only applies to alg2/alg5.
/// `lambda`, `r` and `cheb.m_et` default per temperature regime when null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "domain.L")]
    pub length: f64,
    #[serde(rename = "domain.n")]
    pub n: usize,
    #[serde(rename = "potential.kind")]
    pub potential: PotentialKind,
    #[serde(rename = "potential.V0")]
    pub v0: f64,
    #[serde(rename = "potential.delta")]
    pub delta: f64,
    #[serde(rename = "potential.N_at")]
    pub n_at: usize,
    pub solver: SolverKind,
    pub eta: Option<f64>,
    pub beta: f64,
    #[serde(rename = "N")]
    pub n_electrons: usize,
    pub lambda: Option<f64>,
    pub r: Option<f64>,
    pub w: usize,
    #[serde(rename = "cheb.m_et")]
    pub m_et: Option<usize>,
    #[serde(rename = "cheb.m_fd")]
    pub m_fd: usize,
    #[serde(rename = "cheb.w_work")]
    pub w_work: Option<usize>,
    #[serde(rename = "cheb.jackson")]
    pub jackson: bool,
    #[serde(rename = "power.margin")]
    pub power_margin: f64,
    pub tol_outer: Option<f64>,
    pub max_outer: usize,
    pub inner_fp_iters: usize,
    pub inner_qd_iters: usize,
    pub seed: u64,
    pub allow_slow_contraction: bool,
    pub final_entropy: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            length: 100.0,
            n: 400,
            potential: PotentialKind::KronigPenney,
            v0: 10.0,
            delta: 1.0,
            n_at: 10,
            solver: SolverKind::Alg1,
            eta: s.eta,
            beta: 1.0,
            n_electrons: s.n_electrons,
            lambda: None,
            r: None,
            w: s.w,
            m_et: None,
            m_fd: s.m_fd,
            w_work: s.w_work,
            jackson: s.jackson,
            power_margin: s.power_margin,
            tol_outer: s.tol_outer,
            max_outer: s.max_outer,
            inner_fp_iters: s.inner_fp_iters,
            inner_qd_iters: s.inner_qd_iters,
            seed: s.seed,
            allow_slow_contraction: s.allow_slow_contraction,
            final_entropy: s.final_entropy,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Canonical serialization; the content hash of a run is taken over it.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn check(&self) -> anyhow::Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            bail!("domain.L must be positive, got {}", self.length);
        }
        if self.n < 3 {
            bail!("domain.n must be at least 3, got {}", self.n);
        }
        if self.n_electrons == 0 || self.n_electrons >= self.n {
            bail!("N must lie in [1, domain.n), got {}", self.n_electrons);
        }
        if self.solver.finite_temperature() && !(self.beta > 0.0 && self.beta.is_finite()) {
            bail!("beta must be positive and finite, got {}", self.beta);
        }
        self.potential_spec().validate()?;
        Ok(())
    }

    pub fn domain(&self) -> DomainSpec {
        DomainSpec { length: self.length, n: self.n }
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        match self.potential {
            PotentialKind::Free => PotentialSpec::free(),
            PotentialKind::KronigPenney => PotentialSpec::kronig_penney(self.v0, self.delta, self.n_at, self.length),
        }
    }

    pub fn hamiltonian(&self) -> anyhow::Result<BandedSymMatrix> {
        Ok(build_hamiltonian(&self.domain(), &self.potential_spec())?)
    }

    /// Resolved solver parameters for `self.solver`.
    pub fn solver_config(&self) -> SolverConfig {
        let base = if self.solver.finite_temperature() {
            SolverConfig::finite_temperature(self.n_electrons, self.beta, self.eta)
        } else {
            SolverConfig::zero_temperature(self.n_electrons, self.eta)
        };
        SolverConfig {
            lambda: self.lambda.unwrap_or(base.lambda),
            r: self.r.unwrap_or(base.r),
            w: self.w,
            m_et: self.m_et.unwrap_or(base.m_et),
            m_fd: self.m_fd,
            tol_outer: self.tol_outer,
            max_outer: self.max_outer,
            inner_fp_iters: self.inner_fp_iters,
            inner_qd_iters: self.inner_qd_iters,
            seed: self.seed,
            allow_slow_contraction: self.allow_slow_contraction,
            w_work: self.w_work,
            jackson: self.jackson,
            power_margin: self.power_margin,
            final_entropy: self.final_entropy,
            ..base
        }
    }
}
