use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e}, tolerance {tolerance:e}")]
    Quadrature { estimate: f64, error: f64, tolerance: f64 },

    #[error("moment order {0} outside 1..=4")]
    MomentOrder(u32),

    #[error("cannot subsample a path of {len} points with factor {k}: (len - 1) is not a multiple of k")]
    Subsample { len: usize, k: usize },

    #[error("{0} is only available for the unit model (m = 1, sigma = 1)")]
    RequiresUnitModel(&'static str),

    #[error("{0} needs a model with an exactly known transition law")]
    RequiresExactLaw(&'static str),

    #[error("finite-difference step {step:e} is too coarse for t = {t:e}")]
    StepUnderflow { step: f64, t: f64 },

    #[error("lattice leaked probability mass {leaked:e} (limit {limit:e})")]
    MassLeak { leaked: f64, limit: f64 },

    #[error("transition density underflow (log p = {log_p})")]
    DensityUnderflow { log_p: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of a numerical tolerance, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::StepUnderflow { .. }
                | Error::MassLeak { .. }
                | Error::DensityUnderflow { .. }
        )
    }
}
