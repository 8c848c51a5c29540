//! Transition densities of the diffusion and of the chain.

mod bridge;
mod closed;
mod derivative;
mod lattice;

use serde::{Deserialize, Serialize};

pub use bridge::{dcfz_p, BridgeConfig, DcfzDensity};
pub use closed::{closed_form_p_unit, dcfz_hat_p, gaussian_proxy_ptilde, ln_dcfz_hat_p, GaussianTransition};
pub use derivative::{
    fd_derivative, fd_derivatives, fd_from_samples, fd_reach, p_derivative, DerivScheme, Partial, TransitionDensity,
};
pub use lattice::{chain_step_kernel, chain_transition_ph, LatticeConfig, LatticeDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    BridgeMc,
    ConvolutionOracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Quadrature => "quadrature",
            Method::BridgeMc => "bridge-mc",
            Method::ConvolutionOracle => "convolution-oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    /// Set when the Monte Carlo error exceeds the configured cap.
    pub flagged: bool,
}
