//! Monte Carlo experiments on the likelihood-ratio sequence `Δᵢ` and the
//! regime, remainder and Euler checks built on top of it.

mod deltas;
mod euler;
mod experiments;
mod remainder;
mod report;
pub mod stats;

pub use deltas::{delta_sequence, DeltaSequence, LogProduct};
pub use euler::{euler_consistency_experiment, EulerBenchConfig};
pub use experiments::{
    chain_diffusion_energy, clt_experiment, estimate_q1_q_distance, in_pool, par_paths, simulate_deltas,
    sup_scaling_diagnostics, McConfig,
};
pub use remainder::{remainder_point, theorem4_remainder_check, RemainderConfig, RemainderPoint};
pub use report::{DesignPoint, Estimate, ExperimentReport};
