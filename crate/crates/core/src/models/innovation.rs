use rand::Rng;

use super::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_line, Tolerance};
use crate::rng::standard_normal;
use crate::special::normal_pdf;

/// Two-component Gaussian mixture `w N(mean1, sd1²) + (1-w) N(mean2, sd2²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixture {
    pub weight: f64,
    pub mean1: f64,
    pub sd1: f64,
    pub mean2: f64,
    pub sd2: f64,
}

impl GaussianMixture {
    pub fn new(weight: f64, mean1: f64, sd1: f64, mean2: f64, sd2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) || !(sd1 > 0.0) || !(sd2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture needs weight in [0, 1] and positive sds, got w = {weight}, sd = ({sd1}, {sd2})"
            )));
        }
        Ok(GaussianMixture {
            weight,
            mean1,
            sd1,
            mean2,
            sd2,
        })
    }

    /// Zero-mean, unit-variance mixture with equal component variances and
    /// the given third moment and fourth moment.
    ///
    /// With `v` the variance carried by the component means, the family has
    /// `mu3 = v^{3/2} γ` and `mu4 - 3 = v² (γ² - 2)`, where `γ` is the
    /// skewness of the two-point law of the means. Feasible iff
    /// `mu4 - 3 >= mu3² - 2`, and for `mu3 = 0` also `mu4 <= 3`.
    pub fn skewed(mu3: f64, mu4: f64) -> Result<Self> {
        let excess = mu4 - 3.0;
        let infeasible = || {
            Error::InvalidParameter(format!(
                "no equal-variance two-Gaussian mixture has mu3 = {mu3}, mu4 = {mu4}"
            ))
        };
        if !mu3.is_finite() || !mu4.is_finite() {
            return Err(infeasible());
        }
        let v = if mu3 == 0.0 {
            if !(-2.0..=0.0).contains(&excess) {
                return Err(infeasible());
            }
            (-0.5 * excess).sqrt()
        } else {
            // mu3²/v - 2v² is strictly decreasing on (0, 1].
            let f = |v: f64| mu3 * mu3 / v - 2.0 * v * v - excess;
            if f(1.0) > 0.0 {
                return Err(infeasible());
            }
            let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let sd = (1.0 - v).max(0.0).sqrt();
        if v == 0.0 {
            return GaussianMixture::new(0.5, 0.0, 1.0, 0.0, 1.0);
        }
        if sd == 0.0 {
            return Err(infeasible());
        }
        let gamma2 = mu3 * mu3 / (v * v * v);
        // (1 - 2w)² / (w (1 - w)) = γ²  ⇔  (4 + γ²) w² - (4 + γ²) w + 1 = 0.
        let a = 4.0 + gamma2;
        let mut w = 0.5 * (1.0 - (1.0 - 4.0 / a).sqrt());
        if mu3 < 0.0 {
            w = 1.0 - w;
        }
        let mean1 = (v * (1.0 - w) / w).sqrt();
        let mean2 = -(v * w / (1.0 - w)).sqrt();
        GaussianMixture::new(w, mean1, sd, mean2, sd)
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.weight * normal_pdf((y - self.mean1) / self.sd1) / self.sd1
            + (1.0 - self.weight) * normal_pdf((y - self.mean2) / self.sd2) / self.sd2
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let z = standard_normal(rng);
        if u < self.weight {
            self.mean1 + self.sd1 * z
        } else {
            self.mean2 + self.sd2 * z
        }
    }

    /// `E η^nu` for `nu` in 1..=4.
    pub fn raw_moment(&self, nu: u32) -> Result<f64> {
        let comp = |m: f64, s: f64| -> Result<f64> {
            let s2 = s * s;
            Ok(match nu {
                1 => m,
                2 => m * m + s2,
                3 => m * m * m + 3.0 * m * s2,
                4 => m.powi(4) + 6.0 * m * m * s2 + 3.0 * s2 * s2,
                _ => return Err(Error::MomentOrder(nu)),
            })
        };
        Ok(self.weight * comp(self.mean1, self.sd1)? + (1.0 - self.weight) * comp(self.mean2, self.sd2)?)
    }
}

/// Standardized innovation law before scaling by `σ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationLaw {
    Gaussian,
    Mixture(GaussianMixture),
}

impl InnovationLaw {
    pub fn pdf(&self, y: f64) -> f64 {
        match self {
            InnovationLaw::Gaussian => normal_pdf(y),
            InnovationLaw::Mixture(m) => m.pdf(y),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationLaw::Gaussian => standard_normal(rng),
            InnovationLaw::Mixture(m) => m.sample(rng),
        }
    }

    pub fn raw_moment(&self, nu: u32) -> Result<f64> {
        match self {
            InnovationLaw::Gaussian => match nu {
                1 | 3 => Ok(0.0),
                2 => Ok(1.0),
                4 => Ok(3.0),
                _ => Err(Error::MomentOrder(nu)),
            },
            InnovationLaw::Mixture(m) => m.raw_moment(nu),
        }
    }

    /// Half-width beyond which the density is negligible (12 sds of the widest component).
    pub fn extent(&self) -> f64 {
        match self {
            InnovationLaw::Gaussian => 12.0,
            InnovationLaw::Mixture(m) => (m.mean1.abs() + 12.0 * m.sd1).max(m.mean2.abs() + 12.0 * m.sd2),
        }
    }

    /// Standard deviation of the law; sets the truncation scale.
    pub fn scale(&self) -> f64 {
        match self {
            InnovationLaw::Gaussian => 1.0,
            InnovationLaw::Mixture(m) => {
                let mean = m.raw_moment(1).unwrap_or(0.0);
                (m.raw_moment(2).unwrap_or(1.0) - mean * mean).max(0.0).sqrt()
            }
        }
    }
}

/// Conditional innovation density `q(x, ·)`: the standardized law scaled
/// by the diffusion coefficient `σ(x)`.
#[derive(Debug, Clone)]
pub struct InnovationModel {
    law: InnovationLaw,
    coeff: CoefficientModel,
}

impl InnovationModel {
    pub fn new(law: InnovationLaw, coeff: &CoefficientModel) -> Self {
        InnovationModel {
            law,
            coeff: coeff.clone(),
        }
    }

    pub fn gaussian(coeff: &CoefficientModel) -> Self {
        Self::new(InnovationLaw::Gaussian, coeff)
    }

    /// Skewed family with standardized third and fourth moments.
    pub fn skewed(coeff: &CoefficientModel, mu3: f64, mu4: f64) -> Result<Self> {
        Ok(Self::new(
            InnovationLaw::Mixture(GaussianMixture::skewed(mu3, mu4)?),
            coeff,
        ))
    }

    pub fn law(&self) -> &InnovationLaw {
        &self.law
    }

    pub fn coefficients(&self) -> &CoefficientModel {
        &self.coeff
    }

    /// `q(x, y)`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        let s = self.coeff.sigma(x);
        self.law.pdf(y / s) / s
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        self.coeff.sigma(x) * self.law.sample(rng)
    }

    /// `μ_ν(x)` in closed form.
    pub fn moment(&self, x: f64, nu: u32) -> Result<f64> {
        if !(1..=4).contains(&nu) {
            return Err(Error::MomentOrder(nu));
        }
        Ok(self.coeff.sigma(x).powi(nu as i32) * self.law.raw_moment(nu)?)
    }

    /// `∫ y^ν q(x, y) dy` by quadrature over ±12 innovation sds; `nu = 0`
    /// gives the total mass.
    pub fn moment_by_quadrature(&self, x: f64, nu: u32) -> Result<f64> {
        if nu > 4 {
            return Err(Error::MomentOrder(nu));
        }
        let s = self.coeff.sigma(x);
        let mean = s * self.law.raw_moment(1)?;
        let scale = s * self.law.scale();
        let est = integrate_line(
            |y| y.powi(nu as i32) * self.density(x, y),
            mean,
            scale,
            12.0,
            Tolerance::new(1e-13, 1e-12),
        )?;
        Ok(est.value)
    }

    /// Standardized third moment `μ₃(x) / σ(x)³`.
    pub fn standardized_mu3(&self) -> f64 {
        self.law.raw_moment(3).unwrap_or(0.0)
    }

    /// Standardized excess kurtosis `μ₄(x) / σ(x)⁴ - 3`.
    pub fn standardized_excess(&self) -> f64 {
        self.law.raw_moment(4).unwrap_or(3.0) - 3.0
    }

    /// `μ₃(x) / 6`, the coefficient of `F₁`.
    pub fn f1_coefficient(&self, x: f64) -> f64 {
        self.coeff.sigma(x).powi(3) * self.standardized_mu3() / 6.0
    }

    /// `(μ₄(x) − 3σ⁴(x)) / 24`, the coefficient of `F₂`.
    pub fn f2_coefficient(&self, x: f64) -> f64 {
        self.coeff.sigma(x).powi(4) * self.standardized_excess() / 24.0
    }

    pub fn is_symmetric(&self) -> bool {
        self.standardized_mu3() == 0.0
    }

    pub fn id(&self) -> String {
        match &self.law {
            InnovationLaw::Gaussian => "gaussian".to_string(),
            InnovationLaw::Mixture(m) => format!(
                "mixture(w={},m1={},s1={},m2={},s2={})",
                m.weight, m.mean1, m.sd1, m.mean2, m.sd2
            ),
        }
    }
}
