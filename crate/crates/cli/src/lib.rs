//! Command-line driver for the localized density matrix solvers.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod reproduce;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ldm_core::metrics::ScalingOptions;

use commands::BenchTarget;
use config::{RunConfig, SolverKind};

#[derive(Debug, Parser)]
#[command(name = "ldm", version, about = "Localized density matrices by split Bregman iteration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON config file; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write the density matrix as CSV.
    #[arg(long)]
    pub dump_matrix: bool,
    /// RNG seed for the power method (default 42).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.solver {
            cfg.solver = s;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble H and summarize its spectrum.
    Build(Common),
    /// Run one of alg1, alg2, alg4, alg5.
    Solve(Common),
    /// Exact projector or Fermi-Dirac matrix for the configured regime.
    Reference(Common),
    /// Compare the P.csv of a banded run against a reference run.
    Compare {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        banded: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Per-iteration timing over a size sweep and its log-log slope.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "alg4")]
        target: BenchTarget,
        /// Comma-separated ascending sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
    /// Regenerate every experiment artifact.
    Reproduce {
        #[command(flatten)]
        common: Common,
        /// Small sizes for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
}

/// Caps rayon's global pool from `LDM_THREADS`; ignored if already built.
pub fn init_threads() {
    if let Some(n) = std::env::var("LDM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn report(out: &Path, written: &[String]) {
    for name in written {
        println!("{}", out.join(name).display());
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads();
    match cli.command {
        Command::Build(c) => report(&c.out, &commands::cmd_build(&c.resolve()?, &c.out)?),
        Command::Solve(c) => report(&c.out, &commands::cmd_solve(&c.resolve()?, &c.out, c.dump_matrix)?),
        Command::Reference(c) => report(&c.out, &commands::cmd_reference(&c.resolve()?, &c.out)?),
        Command::Compare { reference, banded, out } => report(&out, &commands::cmd_compare(&reference, &banded, &out)?),
        Command::Bench { common, target, sizes, warmup, samples } => {
            let cfg = common.resolve()?;
            let target = target.into();
            let sizes = sizes.unwrap_or_else(|| commands::default_sizes(target));
            let opts = ScalingOptions { warmup, samples };
            report(&common.out, &commands::cmd_bench(&cfg, target, &sizes, &opts, &common.out)?);
        }
        Command::Reproduce { common, quick } => {
            let cfg = common.resolve()?;
            let plan = if quick { reproduce::Plan::quick(&cfg) } else { reproduce::Plan::full(&cfg) };
            let (_, written) = reproduce::run(&plan, &common.out)?;
            report(&common.out, &written);
        }
    }
    Ok(())
}
