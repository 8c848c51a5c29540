use crate::error::Result;
use crate::models::{lamperti_s, transform_h, CoefficientModel};
use crate::special::{hermite_e, LN_SQRT_2PI};

/// `(2π t)^{-1/2} σ(y)^{-1} exp(−(y − x − t m(y))² / (2 t σ(y)²))`.
pub fn gaussian_proxy_ptilde(coeff: &CoefficientModel, t: f64, x: f64, y: f64) -> f64 {
    let s = coeff.sigma(y);
    let r = y - x - t * coeff.drift(y);
    (-0.5 * r * r / (t * s * s) - LN_SQRT_2PI).exp() / (s * t.sqrt())
}

/// `ln p̂(t, x, y)`.
pub fn ln_dcfz_hat_p(coeff: &CoefficientModel, t: f64, x: f64, y: f64) -> Result<f64> {
    let ds = lamperti_s(coeff, y)? - lamperti_s(coeff, x)?;
    let dh = transform_h(coeff, y)? - transform_h(coeff, x)?;
    Ok(-LN_SQRT_2PI - 0.5 * t.ln() - coeff.sigma(y).ln() - 0.5 * ds * ds / t + dh)
}

/// `(2π t)^{-1/2} σ(y)^{-1} exp(−(S(y) − S(x))²/(2t) + H(y) − H(x))`.
pub fn dcfz_hat_p(coeff: &CoefficientModel, t: f64, x: f64, y: f64) -> Result<f64> {
    Ok(ln_dcfz_hat_p(coeff, t, x, y)?.exp())
}

/// Density of `N(x + t, t)` at `y`: the transition density of `dY = dt + dW`.
pub fn closed_form_p_unit(t: f64, x: f64, y: f64) -> f64 {
    let r = y - x - t;
    (-0.5 * r * r / t - LN_SQRT_2PI).exp() / t.sqrt()
}

/// Transition law `N(α x + β, s²)` of a diffusion with Gaussian transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTransition {
    pub alpha: f64,
    pub beta: f64,
    pub sd: f64,
}

impl GaussianTransition {
    /// `None` unless the model has Gaussian transitions (constant or OU coefficients).
    pub fn of(coeff: &CoefficientModel, t: f64) -> Option<Self> {
        match *coeff {
            CoefficientModel::Constant { drift, sigma } => Some(GaussianTransition {
                alpha: 1.0,
                beta: drift * t,
                sd: sigma * t.sqrt(),
            }),
            CoefficientModel::OrnsteinUhlenbeck { rate, sigma } => {
                let (alpha, var) = crate::paths::ou_transition(rate, sigma, t);
                Some(GaussianTransition {
                    alpha,
                    beta: 0.0,
                    sd: var.sqrt(),
                })
            }
            _ => None,
        }
    }

    pub fn standardized(&self, x: f64, y: f64) -> f64 {
        (y - self.alpha * x - self.beta) / self.sd
    }

    pub fn ln_p(&self, x: f64, y: f64) -> f64 {
        let w = self.standardized(x, y);
        -0.5 * w * w - LN_SQRT_2PI - self.sd.ln()
    }

    /// `∂ₓᵃ ∂ᵧᵇ p / p = (−1)ᵇ αᵃ He_{a+b}(w) / s^{a+b}`.
    pub fn derivative_ratio(&self, x: f64, y: f64, dx: u32, dy: u32) -> f64 {
        let n = dx + dy;
        let sign = if dy.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * self.alpha.powi(dx as i32) * hermite_e(n, self.standardized(x, y)) / self.sd.powi(n as i32)
    }
}
