use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Drift and diffusion coefficients supplied by the user, with derivatives.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn drift(&self, x: f64) -> f64;
    fn drift_d1(&self, x: f64) -> f64;
    fn drift_d2(&self, x: f64) -> f64;
    fn sigma(&self, x: f64) -> f64;
    fn sigma_d1(&self, x: f64) -> f64;
    fn sigma_d2(&self, x: f64) -> f64;
    /// Global bounds `(lower, upper)` on `sigma(x)^2`.
    fn variance_bounds(&self) -> (f64, f64);
}

/// Coefficients `m` and `σ` of `dY = m(Y) dt + σ(Y) dW`.
#[derive(Debug, Clone)]
pub enum CoefficientModel {
    /// Constant drift and diffusion. `drift = sigma = 1` is the unit model.
    Constant {
        drift: f64,
        sigma: f64,
    },
    /// `m(x) = a sin x`, `σ(x) = 1 + b tanh x` with `|b| < 1`.
    Smooth {
        a: f64,
        b: f64,
    },
    /// `m(x) = -rate x`, constant `σ`.
    OrnsteinUhlenbeck {
        rate: f64,
        sigma: f64,
    },
    Custom(Arc<dyn Coefficients>),
}

impl CoefficientModel {
    pub fn unit() -> Self {
        CoefficientModel::Constant { drift: 1.0, sigma: 1.0 }
    }

    pub fn zero_drift() -> Self {
        CoefficientModel::Constant { drift: 0.0, sigma: 1.0 }
    }

    pub fn constant(drift: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && drift.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "constant model needs finite drift and sigma > 0, got ({drift}, {sigma})"
            )));
        }
        Ok(CoefficientModel::Constant { drift, sigma })
    }

    pub fn smooth(a: f64, b: f64) -> Result<Self> {
        if !(b.abs() < 1.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "smooth model needs |b| < 1, got b = {b}"
            )));
        }
        Ok(CoefficientModel::Smooth { a, b })
    }

    pub fn ornstein_uhlenbeck(rate: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && rate.is_finite() && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "OU model needs sigma > 0, got {sigma}"
            )));
        }
        Ok(CoefficientModel::OrnsteinUhlenbeck { rate, sigma })
    }

    pub fn drift(&self, x: f64) -> f64 {
        match self {
            CoefficientModel::Constant { drift, .. } => *drift,
            CoefficientModel::Smooth { a, .. } => a * x.sin(),
            CoefficientModel::OrnsteinUhlenbeck { rate, .. } => -rate * x,
            CoefficientModel::Custom(c) => c.drift(x),
        }
    }

    pub fn drift_d1(&self, x: f64) -> f64 {
        match self {
            CoefficientModel::Constant { .. } => 0.0,
            CoefficientModel::Smooth { a, .. } => a * x.cos(),
            CoefficientModel::OrnsteinUhlenbeck { rate, .. } => -rate,
            CoefficientModel::Custom(c) => c.drift_d1(x),
        }
    }

    pub fn drift_d2(&self, x: f64) -> f64 {
        match self {
            CoefficientModel::Constant { .. } | CoefficientModel::OrnsteinUhlenbeck { .. } => 0.0,
            CoefficientModel::Smooth { a, .. } => -a * x.sin(),
            CoefficientModel::Custom(c) => c.drift_d2(x),
        }
    }

    pub fn sigma(&self, x: f64) -> f64 {
        match self {
            CoefficientModel::Constant { sigma, .. } | CoefficientModel::OrnsteinUhlenbeck { sigma, .. } => *sigma,
            CoefficientModel::Smooth { b, .. } => 1.0 + b * x.tanh(),
            CoefficientModel::Custom(c) => c.sigma(x),
        }
    }

    pub fn sigma_d1(&self, x: f64) -> f64 {
        match self {
            CoefficientModel::Constant { .. } | CoefficientModel::OrnsteinUhlenbeck { .. } => 0.0,
            CoefficientModel::Smooth { b, .. } => {
                let sech = 1.0 / x.cosh();
                b * sech * sech
            }
            CoefficientModel::Custom(c) => c.sigma_d1(x),
        }
    }

    pub fn sigma_d2(&self, x: f64) -> f64 {
        match self {
            CoefficientModel::Constant { .. } | CoefficientModel::OrnsteinUhlenbeck { .. } => 0.0,
            CoefficientModel::Smooth { b, .. } => {
                let sech = 1.0 / x.cosh();
                -2.0 * b * sech * sech * x.tanh()
            }
            CoefficientModel::Custom(c) => c.sigma_d2(x),
        }
    }

    /// `(σ⋆, σ^⋆)`: global lower and upper bounds on `σ²`.
    pub fn variance_bounds(&self) -> (f64, f64) {
        match self {
            CoefficientModel::Constant { sigma, .. } | CoefficientModel::OrnsteinUhlenbeck { sigma, .. } => {
                (sigma * sigma, sigma * sigma)
            }
            CoefficientModel::Smooth { b, .. } => {
                let lo = 1.0 - b.abs();
                let hi = 1.0 + b.abs();
                (lo * lo, hi * hi)
            }
            CoefficientModel::Custom(c) => c.variance_bounds(),
        }
    }

    /// `Some((m, σ))` when both coefficients are constant.
    pub fn constant_coefficients(&self) -> Option<(f64, f64)> {
        match self {
            CoefficientModel::Constant { drift, sigma } => Some((*drift, *sigma)),
            _ => None,
        }
    }

    /// `Some(σ)` when the diffusion coefficient is constant.
    pub fn constant_sigma(&self) -> Option<f64> {
        match self {
            CoefficientModel::Constant { sigma, .. } | CoefficientModel::OrnsteinUhlenbeck { sigma, .. } => {
                Some(*sigma)
            }
            _ => None,
        }
    }

    pub fn is_unit(&self) -> bool {
        self.constant_coefficients() == Some((1.0, 1.0))
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            CoefficientModel::Constant { drift, sigma } if *drift == 1.0 && *sigma == 1.0 => "unit".to_string(),
            CoefficientModel::Constant { drift, sigma } if *drift == 0.0 && *sigma == 1.0 => "zero_drift".to_string(),
            CoefficientModel::Constant { drift, sigma } => format!("constant(m={drift},sigma={sigma})"),
            CoefficientModel::Smooth { a, b } => format!("smooth(a={a},b={b})"),
            CoefficientModel::OrnsteinUhlenbeck { rate, sigma } => {
                format!("ou(rate={rate},sigma={sigma})")
            }
            CoefficientModel::Custom(c) => format!("custom({c:?})"),
        }
    }
}
