//! Coefficient and innovation models, the time grid and assumption checks.

mod coefficients;
mod grid;
mod innovation;
mod lamperti;
mod validate;

pub use coefficients::{CoefficientModel, Coefficients};
pub use grid::{GridSpec, Regime, RegimeTargets};
pub use innovation::{GaussianMixture, InnovationLaw, InnovationModel};
pub use lamperti::{
    drift_potential_c, drift_potential_c_prime, lamperti_inverse, lamperti_s, potential_g, transform_h, LampertiMap,
};
pub use validate::{validate_assumptions, AssumptionCheck, ProbeConfig, ValidationReport};
