use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Markov chains observed on a coarse grid against their diffusion limits.
#[derive(Debug, Parser)]
#[command(name = "chainlimit", version)]
pub struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Overrides mc.seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Overrides output.path.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check the model assumptions on the probe grid.
    Validate,
    /// Simulate chain or diffusion paths.
    Simulate,
    /// Tabulate the transition density and its derivatives.
    Density,
    /// Tabulate the Edgeworth corrections and the ratios delta1, delta2.
    Edgeworth,
    /// Likelihood-ratio distance and Δ scaling diagnostics at the configured grid.
    Regime,
    /// Variance of the summed Δ sequence in the n/k -> c regime (unit model).
    Clt {
        /// Ratio c = n/k.
        #[arg(long)]
        c: Option<f64>,
        /// Standardized third moment of the innovations.
        #[arg(long)]
        mu3: Option<f64>,
        /// Subsampling factor k.
        #[arg(long)]
        k: Option<usize>,
    },
    /// First-order remainder of the chain density over a ladder of k.
    Remainder,
    /// Euler step ladder against the exact coarse law.
    EulerBench,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate => "simulate",
            Command::Density => "density",
            Command::Edgeworth => "edgeworth",
            Command::Regime => "regime",
            Command::Clt { .. } => "clt",
            Command::Remainder => "remainder",
            Command::EulerBench => "euler-bench",
        }
    }
}
