use serde::{Deserialize, Serialize};

use super::convolve::{convolve_detailed, Convolution, ConvolutionKernel, ConvolutionQuad};
use super::kernel::{Applied, DensityKernel, Kernel, Operator};
use crate::density::{BridgeConfig, DerivScheme, GaussianTransition, Method, TransitionDensity};
use crate::error::{Error, Result};
use crate::models::{CoefficientModel, GridSpec, InnovationModel, ProbeConfig};
use crate::special::hermite_e;

/// Densities below `exp(LOG_FLOOR)` are treated as underflow in the δ ratios.
pub const LOG_FLOOR: f64 = -700.0;

/// Standardized moments closer to zero than this count as exactly zero.
const ZERO_MOMENT: f64 = 1e-14;

/// Closed forms where they exist, quadrature otherwise; or quadrature always.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    #[default]
    Auto,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeworthQuad {
    /// Outer convolutions.
    pub outer: ConvolutionQuad,
    /// The outer convolution of the nested term.
    pub nested_outer: ConvolutionQuad,
    /// The inner convolution of the nested term.
    pub inner: ConvolutionQuad,
    /// Relative step for differencing the inner convolution.
    pub nested_rel_step: f64,
    /// Derivatives of `p` itself.
    pub deriv: DerivScheme,
    pub bridge: BridgeConfig,
}

impl Default for EdgeworthQuad {
    fn default() -> Self {
        EdgeworthQuad {
            outer: ConvolutionQuad::default(),
            nested_outer: ConvolutionQuad {
                time_nodes: 24,
                panels: 4,
                rel_tol: 1e-4,
                ..ConvolutionQuad::default()
            },
            inner: ConvolutionQuad {
                time_nodes: 16,
                panels: 3,
                rel_tol: 1e-4,
                ..ConvolutionQuad::default()
            },
            nested_rel_step: 5e-2,
            deriv: DerivScheme {
                rel_step: 5e-2,
                ..DerivScheme::default()
            },
            bridge: BridgeConfig::default(),
        }
    }
}

impl EdgeworthQuad {
    pub fn refined(&self) -> Self {
        EdgeworthQuad {
            outer: self.outer.refined(),
            nested_outer: self.nested_outer.refined(),
            inner: self.inner.refined(),
            ..*self
        }
    }
}

/// Everything the correction terms need: model, innovations, grid and
/// numerical settings.
#[derive(Debug, Clone)]
pub struct EdgeworthContext {
    coeff: CoefficientModel,
    innov: InnovationModel,
    grid: GridSpec,
    density: TransitionDensity,
    quad: EdgeworthQuad,
    mode: EvalMode,
    regime_violating: bool,
}

impl EdgeworthContext {
    pub fn new(innov: &InnovationModel, grid: GridSpec, quad: EdgeworthQuad, mode: EvalMode) -> Result<Self> {
        grid.check()?;
        let coeff = innov.coefficients().clone();
        let density = TransitionDensity::new(&coeff, &quad.bridge)?;
        Ok(EdgeworthContext {
            coeff,
            innov: innov.clone(),
            grid,
            density,
            quad,
            mode,
            regime_violating: violates_regime(&grid),
        })
    }

    /// The same models and settings on another grid, reusing the density tables.
    pub fn with_grid(&self, grid: GridSpec) -> Result<Self> {
        grid.check()?;
        Ok(EdgeworthContext {
            grid,
            regime_violating: violates_regime(&grid),
            ..self.clone()
        })
    }

    pub fn coefficients(&self) -> &CoefficientModel {
        &self.coeff
    }

    pub fn innovations(&self) -> &InnovationModel {
        &self.innov
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn quad(&self) -> &EdgeworthQuad {
        &self.quad
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn density(&self) -> &TransitionDensity {
        &self.density
    }

    /// Set when the grid misses `C⁻¹k^{−ϰ} < hk < C` with the default constants.
    pub fn regime_violating(&self) -> bool {
        self.regime_violating
    }

    pub fn kernel(&self) -> DensityKernel {
        DensityKernel {
            density: self.density.clone(),
            scheme: self.quad.deriv,
        }
    }

    fn closed_form(&self) -> Option<ConstantModelTerms> {
        if self.mode == EvalMode::Numeric {
            return None;
        }
        let (drift, sigma) = self.coeff.constant_coefficients()?;
        Some(ConstantModelTerms {
            drift,
            sigma,
            mu3: self.mu3(),
            excess: self.excess(),
        })
    }

    fn mu3(&self) -> f64 {
        let m = self.innov.standardized_mu3();
        if m.abs() < ZERO_MOMENT {
            0.0
        } else {
            m
        }
    }

    fn excess(&self) -> f64 {
        let e = self.innov.standardized_excess();
        if e.abs() < ZERO_MOMENT {
            0.0
        } else {
            e
        }
    }

    /// `F₁ = (μ₃(x)/6) ∂ₓ³`.
    pub fn f1_operator(&self) -> Operator {
        let innov = self.innov.clone();
        let constant = self.coeff.constant_sigma().is_some();
        Operator::new(3, constant, move |x| [0.0, 0.0, 0.0, innov.f1_coefficient(x), 0.0])
    }

    /// `F₂ = ((μ₄(x) − 3σ⁴(x))/24) ∂ₓ⁴`.
    pub fn f2_operator(&self) -> Operator {
        let innov = self.innov.clone();
        let constant = self.coeff.constant_sigma().is_some();
        Operator::new(4, constant, move |x| [0.0, 0.0, 0.0, 0.0, innov.f2_coefficient(x)])
    }

    /// `L★² − L²`, with `L★` the generator whose coefficients are frozen at `x0`.
    pub fn frozen_operator(&self, x0: f64) -> Operator {
        let coeff = self.coeff.clone();
        let (m0, s0) = (coeff.drift(x0), coeff.sigma(x0) * coeff.sigma(x0));
        let constant = coeff.constant_coefficients().is_some();
        Operator::new(4, constant, move |z| {
            let l2 = generator_squared(&coeff, z);
            [-l2[0], -l2[1], m0 * m0 - l2[2], s0 * m0 - l2[3], 0.25 * s0 * s0 - l2[4]]
        })
    }
}

fn violates_regime(grid: &GridSpec) -> bool {
    let probe = ProbeConfig::default();
    let hk = grid.coarse_step();
    let lower = (grid.k as f64).powf(-probe.kappa) / probe.c;
    !(lower < hk && hk < probe.c)
}

/// Coefficients of `L²` in `Σₙ aₙ ∂ⁿ`, for `L = ½σ²∂² + m∂`.
pub fn generator_squared(coeff: &CoefficientModel, z: f64) -> [f64; 5] {
    let (m, m1, m2) = (coeff.drift(z), coeff.drift_d1(z), coeff.drift_d2(z));
    let (s, s1, s2) = (coeff.sigma(z), coeff.sigma_d1(z), coeff.sigma_d2(z));
    let v = s * s;
    let v1 = 2.0 * s * s1;
    let v2 = 2.0 * (s1 * s1 + s * s2);
    [
        0.0,
        0.5 * v * m2 + m * m1,
        0.25 * v * v2 + v * m1 + 0.5 * m * v1 + m * m,
        0.5 * v * v1 + v * m,
        0.25 * v * v,
    ]
}

/// `F₁[f]`.
pub fn apply_f1<'a>(ctx: &EdgeworthContext, f: &'a dyn Kernel) -> Applied<'a> {
    Applied {
        op: ctx.f1_operator(),
        inner: f,
    }
}

/// `F₂[f]`.
pub fn apply_f2<'a>(ctx: &EdgeworthContext, f: &'a dyn Kernel) -> Applied<'a> {
    Applied {
        op: ctx.f2_operator(),
        inner: f,
    }
}

/// One correction term with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub value: f64,
    pub method: Method,
    /// Set when a quadrature tolerance was missed.
    pub flagged: bool,
}

impl TermValue {
    fn exact(value: f64) -> Self {
        TermValue {
            value,
            method: Method::ClosedForm,
            flagged: false,
        }
    }

    fn numeric(c: Convolution, scale: f64) -> Self {
        TermValue {
            value: scale * c.value,
            method: Method::Quadrature,
            flagged: !c.converged,
        }
    }
}

/// The three parts of `π₂` and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pi2 {
    /// `p ⊗ F₂[p]`.
    pub kurtosis: TermValue,
    /// `p ⊗ F₁[p ⊗ F₁[p]]`.
    pub nested: TermValue,
    /// `½ p ⊗ (L★² − L²)p`.
    pub frozen: TermValue,
}

impl Pi2 {
    pub fn value(&self) -> f64 {
        self.kurtosis.value + self.nested.value + self.frozen.value
    }

    pub fn flagged(&self) -> bool {
        self.kurtosis.flagged || self.nested.flagged || self.frozen.flagged
    }
}

/// `½ (p ⊗ (L★² − L²)p)(t, x, y)`.
pub fn frozen_generator_term(ctx: &EdgeworthContext, t: f64, x: f64, y: f64) -> Result<TermValue> {
    if ctx.coeff.constant_coefficients().is_some() {
        return Ok(TermValue::exact(0.0));
    }
    let p = ctx.kernel();
    let a = Applied {
        op: ctx.frozen_operator(x),
        inner: &p,
    };
    Ok(TermValue::numeric(
        convolve_detailed(&p, &a, t, x, y, &ctx.quad.outer)?,
        0.5,
    ))
}

/// `π₁ = p ⊗ F₁[p]`.
pub fn pi1(ctx: &EdgeworthContext, t: f64, x: f64, y: f64) -> Result<TermValue> {
    if ctx.mu3() == 0.0 {
        return Ok(TermValue::exact(0.0));
    }
    if let Some(c) = ctx.closed_form() {
        return Ok(TermValue::exact(c.pi1(t, x, y)));
    }
    let p = ctx.kernel();
    let a = apply_f1(ctx, &p);
    Ok(TermValue::numeric(
        convolve_detailed(&p, &a, t, x, y, &ctx.quad.outer)?,
        1.0,
    ))
}

/// `π₂ = p ⊗ F₂[p] + p ⊗ F₁[p ⊗ F₁[p]] + ½ p ⊗ (L★² − L²)p`, term by term.
pub fn pi2(ctx: &EdgeworthContext, t: f64, x: f64, y: f64) -> Result<Pi2> {
    let closed = ctx.closed_form();
    let p = ctx.kernel();
    let kurtosis = if ctx.excess() == 0.0 {
        TermValue::exact(0.0)
    } else if let Some(c) = closed {
        TermValue::exact(c.kurtosis_term(t, x, y))
    } else {
        let a = apply_f2(ctx, &p);
        TermValue::numeric(convolve_detailed(&p, &a, t, x, y, &ctx.quad.outer)?, 1.0)
    };
    let nested = if ctx.mu3() == 0.0 {
        TermValue::exact(0.0)
    } else if let Some(c) = closed {
        TermValue::exact(c.nested_term(t, x, y))
    } else {
        nested_term(ctx, &p, t, x, y)?
    };
    Ok(Pi2 {
        kurtosis,
        nested,
        frozen: frozen_generator_term(ctx, t, x, y)?,
    })
}

fn nested_term(ctx: &EdgeworthContext, p: &DensityKernel, t: f64, x: f64, y: f64) -> Result<TermValue> {
    let a1 = apply_f1(ctx, p);
    let scheme = DerivScheme {
        rel_step: ctx.quad.nested_rel_step,
        min_step: 0.0,
        richardson: true,
        force_fd: true,
    };
    let inner = ConvolutionKernel::new(p, &a1, ctx.quad.inner, scheme);
    let a2 = apply_f1(ctx, &inner);
    let c = convolve_detailed(p, &a2, t, x, y, &ctx.quad.nested_outer)?;
    let mut out = TermValue::numeric(c, 1.0);
    out.flagged |= inner.flagged();
    Ok(out)
}

/// `sign(v) · exp(ln|v| + ln scale − ln p)`, the δ ratios without forming `v/p`.
fn log_ratio(v: f64, ln_scale: f64, ln_p: f64) -> Result<f64> {
    if ln_p < LOG_FLOOR || ln_p.is_nan() {
        return Err(Error::DensityUnderflow { log_p: ln_p });
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    Ok(v.signum() * (v.abs().ln() + ln_scale - ln_p).exp())
}

/// `δ₁(x, y) = √h π₁(kh, x, y) / p(kh, x, y)`.
pub fn delta1(ctx: &EdgeworthContext, x: f64, y: f64) -> Result<f64> {
    let t = ctx.grid.coarse_step();
    let ln_p = ctx.density.ln_value(t, x, y)?;
    if let Some(c) = ctx.closed_form() {
        log_ratio(1.0, 0.0, ln_p)?;
        return Ok(c.delta1(ctx.grid.k, t, x, y));
    }
    log_ratio(pi1(ctx, t, x, y)?.value, 0.5 * ctx.grid.h.ln(), ln_p)
}

/// `δ₂(x, y) = h π₂(kh, x, y) / p(kh, x, y)`.
pub fn delta2(ctx: &EdgeworthContext, x: f64, y: f64) -> Result<f64> {
    let t = ctx.grid.coarse_step();
    let ln_p = ctx.density.ln_value(t, x, y)?;
    if let Some(c) = ctx.closed_form() {
        log_ratio(1.0, 0.0, ln_p)?;
        return Ok(c.delta2(ctx.grid.k, t, x, y));
    }
    log_ratio(pi2(ctx, t, x, y)?.value(), ctx.grid.h.ln(), ln_p)
}

/// Closed forms of the correction terms for constant `m` and `σ`, in terms
/// of Hermite polynomials of `w = (y − x − mt)/(σ√t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantModelTerms {
    pub drift: f64,
    pub sigma: f64,
    /// Standardized third moment.
    pub mu3: f64,
    /// Standardized excess kurtosis.
    pub excess: f64,
}

impl ConstantModelTerms {
    fn w(&self, t: f64, x: f64, y: f64) -> f64 {
        (y - x - self.drift * t) / (self.sigma * t.sqrt())
    }

    fn p(&self, t: f64, x: f64, y: f64) -> f64 {
        let w = self.w(t, x, y);
        crate::special::normal_pdf(w) / (self.sigma * t.sqrt())
    }

    /// `π₁ = (μ̃₃/6) He₃(w) p / √t`.
    pub fn pi1(&self, t: f64, x: f64, y: f64) -> f64 {
        self.mu3 / 6.0 * hermite_e(3, self.w(t, x, y)) * self.p(t, x, y) / t.sqrt()
    }

    /// `p ⊗ F₂[p] = (ẽ/24) He₄(w) p / t`.
    pub fn kurtosis_term(&self, t: f64, x: f64, y: f64) -> f64 {
        self.excess / 24.0 * hermite_e(4, self.w(t, x, y)) * self.p(t, x, y) / t
    }

    /// `p ⊗ F₁[p ⊗ F₁[p]] = (μ̃₃²/72) He₆(w) p / t`.
    pub fn nested_term(&self, t: f64, x: f64, y: f64) -> f64 {
        self.mu3 * self.mu3 / 72.0 * hermite_e(6, self.w(t, x, y)) * self.p(t, x, y) / t
    }

    pub fn pi2(&self, t: f64, x: f64, y: f64) -> f64 {
        self.kurtosis_term(t, x, y) + self.nested_term(t, x, y)
    }

    /// `δ₁ = μ̃₃ He₃(w) / (6√k)` with `t = kh`.
    pub fn delta1(&self, k: usize, t: f64, x: f64, y: f64) -> f64 {
        self.mu3 * hermite_e(3, self.w(t, x, y)) / (6.0 * (k as f64).sqrt())
    }

    /// `δ₂ = (ẽ He₄(w)/24 + μ̃₃² He₆(w)/72) / k` with `t = kh`.
    pub fn delta2(&self, k: usize, t: f64, x: f64, y: f64) -> f64 {
        let w = self.w(t, x, y);
        (self.excess / 24.0 * hermite_e(4, w) + self.mu3 * self.mu3 / 72.0 * hermite_e(6, w)) / k as f64
    }
}

/// `π₁` on the unit model (`m = σ = 1`) as `−(μ₃/6) t ∂ᵧ³p(t, x, y)`.
pub fn pi1_closed_constant(mu3: f64, t: f64, x: f64, y: f64) -> f64 {
    let g = GaussianTransition::of(&CoefficientModel::unit(), t).expect("unit model is Gaussian");
    let p = g.ln_p(x, y).exp();
    -mu3 / 6.0 * t * g.derivative_ratio(x, y, 0, 3) * p
}

/// The same quantity in Hermite form, `(μ₃/6) He₃(w) p / √t`.
pub fn pi1_closed_constant_hermite(mu3: f64, t: f64, x: f64, y: f64) -> f64 {
    ConstantModelTerms {
        drift: 1.0,
        sigma: 1.0,
        mu3,
        excess: 0.0,
    }
    .pi1(t, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::closed_form_p_unit;
    use crate::quadrature::{integrate_line, Tolerance};
    use approx::assert_relative_eq;

    fn unit_ctx(mu3: f64, mu4: f64, k: usize, h: f64, mode: EvalMode) -> EdgeworthContext {
        let coeff = CoefficientModel::unit();
        let innov = if mu3 == 0.0 && mu4 == 3.0 {
            InnovationModel::gaussian(&coeff)
        } else {
            InnovationModel::skewed(&coeff, mu3, mu4).unwrap()
        };
        EdgeworthContext::new(&innov, GridSpec::new(h, k, 4).unwrap(), EdgeworthQuad::default(), mode).unwrap()
    }

    /// Hermite polynomials from the three-term recurrence, independent of `special`.
    fn he(n: u32, x: f64) -> f64 {
        match n {
            3 => x * x * x - 3.0 * x,
            4 => x.powi(4) - 6.0 * x * x + 3.0,
            6 => x.powi(6) - 15.0 * x.powi(4) + 45.0 * x * x - 15.0,
            _ => unreachable!(),
        }
    }

    #[test]
    fn symmetric_innovations_give_zero_pi1() {
        let ctx = unit_ctx(0.0, 2.5, 100, 0.001, EvalMode::Numeric);
        for (x, y) in [(0.0, 0.1), (0.3, -0.2)] {
            assert_eq!(pi1(&ctx, 0.1, x, y).unwrap().value, 0.0);
            assert_eq!(delta1(&ctx, x, y).unwrap(), 0.0);
        }
    }

    #[test]
    fn gaussian_constant_model_gives_zero_pi2() {
        let ctx = unit_ctx(0.0, 3.0, 100, 0.001, EvalMode::Numeric);
        let p2 = pi2(&ctx, 0.1, 0.0, 0.2).unwrap();
        assert_eq!(p2.value(), 0.0);
        assert_eq!(frozen_generator_term(&ctx, 0.1, 0.0, 0.2).unwrap().value, 0.0);
        let coeff = CoefficientModel::zero_drift();
        let ctx = EdgeworthContext::new(
            &InnovationModel::skewed(&coeff, 0.5, 3.0).unwrap(),
            GridSpec::new(0.001, 100, 4).unwrap(),
            EdgeworthQuad::default(),
            EvalMode::Numeric,
        )
        .unwrap();
        assert_eq!(frozen_generator_term(&ctx, 0.1, 0.0, 0.2).unwrap().value, 0.0);
        assert_eq!(pi2(&ctx, 0.1, 0.0, 0.2).unwrap().kurtosis.value, 0.0);
    }

    #[test]
    fn closed_forms_agree() {
        for (t, x, y) in [(0.1, 0.0, 0.0), (0.04, 0.2, -0.3), (1.0, 0.0, 2.0)] {
            let a = pi1_closed_constant(1.0, t, x, y);
            let b = pi1_closed_constant_hermite(1.0, t, x, y);
            let w = (y - x - t) / t.sqrt();
            let oracle = he(3, w) * closed_form_p_unit(t, x, y) / (6.0 * t.sqrt());
            assert_relative_eq!(a, b, max_relative = 1e-12);
            assert_relative_eq!(a, oracle, max_relative = 1e-12);
            assert_relative_eq!(pi1_closed_constant(2.0, t, x, y), 2.0 * a, max_relative = 1e-15);
        }
        // −(1/6) t ∂ᵧ³p at t = 1, x = 0, y = 2 from the spot value of ∂ᵧ³p.
        assert_relative_eq!(
            pi1_closed_constant(1.0, 1.0, 0.0, 2.0),
            -0.483_941_449_038_286_7 / 6.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn delta1_spot_values() {
        let ctx = unit_ctx(1.0, 3.0, 100, 0.001, EvalMode::Auto);
        assert!(delta1(&ctx, 0.0, 0.1).unwrap().abs() < 1e-15);
        // w = −√0.1: He₃(w)/60.
        let w = -(0.1f64).sqrt();
        let expected = (w * w * w - 3.0 * w) / 60.0;
        assert_relative_eq!(delta1(&ctx, 0.0, 0.0).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 0.015_284_3, max_relative = 1e-5);
        // Numeric quadrature gives the same ratio.
        let num = unit_ctx(1.0, 3.0, 100, 0.001, EvalMode::Numeric);
        assert_relative_eq!(delta1(&num, 0.0, 0.0).unwrap(), expected, max_relative = 1e-6);
    }

    #[test]
    fn pi1_numeric_matches_closed_form() {
        let ctx = unit_ctx(1.0, 3.0, 100, 0.001, EvalMode::Numeric);
        for t in [0.04f64, 0.1, 0.25] {
            let s = t.sqrt();
            let ys: Vec<f64> = (-8..=8).map(|i| 0.5 * i as f64 * s).collect();
            let closed: Vec<f64> = ys.iter().map(|&y| pi1_closed_constant(1.0, t, 0.0, y)).collect();
            let scale = closed.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for (y, c) in ys.iter().zip(&closed) {
                let v = pi1(&ctx, t, 0.0, *y).unwrap();
                assert_eq!(v.method, Method::Quadrature);
                assert!(!v.flagged);
                assert!(
                    (v.value - c).abs() <= 1e-3 * (c.abs() + 1e-8 * scale),
                    "t = {t}, y = {y}: {} vs {c}",
                    v.value
                );
            }
        }
    }

    #[test]
    fn pi1_integrates_to_zero() {
        let coeff = CoefficientModel::ornstein_uhlenbeck(1.0, 1.0).unwrap();
        let innov = InnovationModel::skewed(&coeff, 1.0, 3.0).unwrap();
        let ctx = EdgeworthContext::new(
            &innov,
            GridSpec::new(0.001, 100, 4).unwrap(),
            EdgeworthQuad::default(),
            EvalMode::Numeric,
        )
        .unwrap();
        let t = 0.1f64;
        let x = 0.4;
        let center = x * (-t).exp();
        let mass = integrate_line(
            |y| pi1(&ctx, t, x, y).unwrap().value,
            center,
            t.sqrt(),
            10.0,
            Tolerance::new(1e-9, 1e-9),
        )
        .unwrap();
        assert!(mass.value.abs() < 1e-6, "∫π₁ = {}", mass.value);
        assert!(mass.abs_value > 0.1);
    }

    #[test]
    fn kurtosis_term_matches_closed_form() {
        let ctx = unit_ctx(0.0, 2.4, 100, 0.001, EvalMode::Numeric);
        let e = ctx.innovations().standardized_excess();
        for (t, dy) in [(0.1, 0.1), (0.04, 0.3), (0.25, -0.6)] {
            let v = pi2(&ctx, t, 0.0, dy).unwrap();
            assert_eq!(v.nested.value, 0.0);
            let w = (dy - t) / t.sqrt();
            let closed = e / 24.0 * he(4, w) * closed_form_p_unit(t, 0.0, dy) / t;
            assert_relative_eq!(v.kurtosis.value, closed, max_relative = 1e-3);
        }
    }

    #[test]
    fn nested_term_matches_closed_form() {
        let ctx = unit_ctx(1.0, 3.0, 100, 0.001, EvalMode::Numeric);
        for (t, dy) in [(0.1f64, 0.25), (0.04, -0.3), (0.25, 0.0), (0.1, 0.1), (0.25, 1.5)] {
            let v = pi2(&ctx, t, 0.0, dy).unwrap();
            assert_eq!(v.kurtosis.value, 0.0);
            let w = (dy - t) / t.sqrt();
            let closed = he(6, w) * closed_form_p_unit(t, 0.0, dy) / (72.0 * t);
            assert_relative_eq!(v.nested.value, closed, max_relative = 1e-2);
            assert!(!v.nested.flagged);
        }
    }

    #[test]
    fn generator_squared_matches_repeated_generator() {
        // L(Lf) by differencing Lf, with f(z) = exp(0.3 z) cos z known in closed form.
        let coeff = CoefficientModel::smooth(0.3, 0.3).unwrap();
        let d = |n: u32, z: f64| {
            let (a, b) = (0.3f64, 1.0f64);
            let r = (a * a + b * b).sqrt();
            let phi = b.atan2(a);
            r.powi(n as i32) * (a * z).exp() * (z + n as f64 * phi).cos()
        };
        let lf = |z: f64| 0.5 * coeff.sigma(z).powi(2) * d(2, z) + coeff.drift(z) * d(1, z);
        for z in [-1.0, 0.2, 1.3] {
            let e = 1e-3;
            let l1 = (lf(z + e) - lf(z - e)) / (2.0 * e);
            let l2 = (lf(z + e) - 2.0 * lf(z) + lf(z - e)) / (e * e);
            let direct = 0.5 * coeff.sigma(z).powi(2) * l2 + coeff.drift(z) * l1;
            let a = generator_squared(&coeff, z);
            let via: f64 = (0..5).map(|n| a[n] * d(n as u32, z)).sum();
            assert_relative_eq!(via, direct, max_relative = 1e-5);
        }
    }

    #[test]
    fn ou_pi2_integrates_to_zero() {
        let coeff = CoefficientModel::ornstein_uhlenbeck(1.0, 1.0).unwrap();
        let innov = InnovationModel::gaussian(&coeff);
        let ctx = EdgeworthContext::new(
            &innov,
            GridSpec::new(0.001, 100, 4).unwrap(),
            EdgeworthQuad::default(),
            EvalMode::Numeric,
        )
        .unwrap();
        let (t, x) = (0.1f64, 0.5);
        let center = x * (-t).exp();
        let term = |y: f64| frozen_generator_term(&ctx, t, x, y).unwrap().value;
        let mass = integrate_line(term, center, t.sqrt(), 10.0, Tolerance::new(1e-9, 1e-9)).unwrap();
        assert!(mass.value.abs() < 1e-5, "∫π₂ = {}", mass.value);
        assert!(mass.abs_value > 1e-3, "frozen term should not vanish for OU");
    }

    #[test]
    fn smooth_frozen_term_is_stable_under_refinement() {
        let coeff = CoefficientModel::smooth(0.3, 0.3).unwrap();
        let innov = InnovationModel::gaussian(&coeff);
        let mut quad = EdgeworthQuad::default();
        quad.bridge.samples = 64;
        quad.bridge.mesh = 32;
        let grid = GridSpec::new(0.001, 100, 4).unwrap();
        let base = EdgeworthContext::new(&innov, grid, quad, EvalMode::Auto).unwrap();
        let fine = EdgeworthContext::new(&innov, grid, quad.refined(), EvalMode::Auto).unwrap();
        let a = frozen_generator_term(&base, 0.1, 0.0, 0.1).unwrap();
        let b = frozen_generator_term(&fine, 0.1, 0.0, 0.1).unwrap();
        assert!(a.value.is_finite() && a.value != 0.0);
        assert!(
            (a.value - b.value).abs() <= 0.1 * b.value.abs(),
            "{} vs {}",
            a.value,
            b.value
        );
    }

    #[test]
    fn delta1_halves_when_k_quadruples() {
        let coarse = unit_ctx(1.0, 3.0, 25, 0.004, EvalMode::Auto);
        let fine = unit_ctx(1.0, 3.0, 100, 0.001, EvalMode::Auto);
        for y in [-0.5, -0.1, 0.3, 0.9] {
            let a = delta1(&coarse, 0.0, y).unwrap();
            let b = delta1(&fine, 0.0, y).unwrap();
            assert_relative_eq!(b, a / 2.0, max_relative = 0.05);
        }
    }

    #[test]
    fn delta_bound_shapes() {
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        for k in [25usize, 100, 400] {
            let ctx = unit_ctx(1.0, 2.5, k, 0.1 / k as f64, EvalMode::Auto);
            let s = 0.1f64.sqrt();
            let (mut w1, mut w2) = (0.0f64, 0.0f64);
            for i in -40..=40 {
                let y = 0.1 * i as f64 * s;
                let r = y.abs() / s;
                w1 = w1.max(delta1(&ctx, 0.0, y).unwrap().abs() * (k as f64).sqrt() / (1.0 + r).powi(3));
                w2 = w2.max(delta2(&ctx, 0.0, y).unwrap().abs() * k as f64 / (1.0 + r.powi(7)));
            }
            c1.push(w1);
            c2.push(w2);
        }
        for c in [&c1, &c2] {
            let (lo, hi) = c.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            assert!(hi <= 2.0 * lo, "fitted constants {c:?}");
        }
    }

    #[test]
    fn underflow_is_reported() {
        let ctx = unit_ctx(1.0, 3.0, 100, 0.001, EvalMode::Auto);
        match delta1(&ctx, 0.0, 20.0) {
            Err(Error::DensityUnderflow { log_p }) => assert!(log_p < LOG_FLOOR),
            other => panic!("expected underflow, got {other:?}"),
        }
    }
}
