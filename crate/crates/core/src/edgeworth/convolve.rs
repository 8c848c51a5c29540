use std::cell::RefCell;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{Kernel, Operator};
use crate::density::{fd_from_samples, fd_reach, DerivScheme};
use crate::error::{Error, Result};
use crate::quadrature::{composite_gk21, GaussLegendre};

/// Quadrature settings for `f ⊗ g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvolutionQuad {
    /// Gauss–Legendre nodes in `θ`, where `u = t sin²θ`; half go on each side of `u = t/2`.
    pub time_nodes: usize,
    /// Kronrod panels across the spatial window.
    pub panels: usize,
    /// Half-width of the spatial window in bridging standard deviations.
    pub sds: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for ConvolutionQuad {
    fn default() -> Self {
        ConvolutionQuad {
            time_nodes: 64,
            panels: 8,
            sds: 10.0,
            abs_tol: 1e-12,
            rel_tol: 1e-7,
        }
    }
}

impl ConvolutionQuad {
    /// Twice the nodes and panels.
    pub fn refined(&self) -> Self {
        ConvolutionQuad {
            time_nodes: 2 * self.time_nodes,
            panels: 2 * self.panels,
            ..*self
        }
    }

    fn check(&self) -> Result<()> {
        if self.time_nodes < 2 || self.panels == 0 || !(self.sds > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "convolution quadrature needs time_nodes >= 2, panels >= 1, sds > 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Result of a time-space convolution with its spatial error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convolution {
    pub value: f64,
    /// Sum over time nodes of the spatial Kronrod error estimates.
    pub error: f64,
    /// Same quadrature applied to the absolute integrand.
    pub abs_value: f64,
    pub converged: bool,
}

impl Convolution {
    pub fn tolerance(&self, quad: &ConvolutionQuad) -> f64 {
        quad.abs_tol.max(quad.rel_tol * self.abs_value)
    }

    /// The value, or a quadrature error carrying the achieved estimate.
    pub fn into_result(self, quad: &ConvolutionQuad) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                estimate: self.value,
                error: self.error,
                tolerance: self.tolerance(quad),
            })
        }
    }
}

/// `f ⊗ g(t, x, y) = ∫₀ᵗ du ∫ f(u, x, z) g(t − u, z, y) dz`, failing when the
/// spatial error estimate misses the tolerance.
pub fn convolve_time_space(
    f: &dyn Kernel,
    g: &dyn Kernel,
    t: f64,
    x: f64,
    y: f64,
    quad: &ConvolutionQuad,
) -> Result<f64> {
    convolve_detailed(f, g, t, x, y, quad)?.into_result(quad)
}

/// `f ⊗ g` with diagnostics.
///
/// When `g = A[q]` for a differential operator `A`, the second half of the
/// time integral (where `q` is the narrow factor) moves `A` onto `f` by
/// integration by parts, so no derivative of a nearly singular kernel is taken.
pub fn convolve_detailed(
    f: &dyn Kernel,
    g: &dyn Kernel,
    t: f64,
    x: f64,
    y: f64,
    quad: &ConvolutionQuad,
) -> Result<Convolution> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("convolution needs t > 0, got {t}")));
    }
    quad.check()?;
    let spread = f.spread().max(g.spread());
    let gl = GaussLegendre::new(quad.time_nodes / 2);
    let quarter = std::f64::consts::FRAC_PI_4;
    let mut nodes = Vec::with_capacity(2 * gl.len());
    for (half, (a, b)) in [(0.0, quarter), (quarter, 2.0 * quarter)].into_iter().enumerate() {
        for (theta, w) in gl.mapped(a, b) {
            let sin = theta.sin();
            nodes.push((t * sin * sin, w * t * (2.0 * theta).sin(), half == 1));
        }
    }
    let parts: Vec<Result<(f64, f64, f64)>> = nodes
        .par_iter()
        .map(|&(u, w, second)| {
            let s = t - u;
            let center = x + (u / t) * (y - x);
            let half = quad.sds * spread * (u * s / t).sqrt();
            let est = match (second, g.as_applied()) {
                (true, Some((op, q))) => by_parts(f, op, q, u, s, x, y, center, half, quad.panels)?,
                _ => spatial(|z| Ok(f.eval(u, x, z)? * g.eval(s, z, y)?), center, half, quad.panels)?,
            };
            Ok((w * est.0, w * est.1, w * est.2))
        })
        .collect();
    let mut out = Convolution {
        value: 0.0,
        error: 0.0,
        abs_value: 0.0,
        converged: true,
    };
    for part in parts {
        let (v, e, a) = part?;
        out.value += v;
        out.error += e;
        out.abs_value += a;
    }
    out.converged = out.error <= out.tolerance(quad) && out.value.is_finite();
    Ok(out)
}

/// `∫ Σₙ (−1)ⁿ ∂_zⁿ[cₙ(z) f(u, x, z)] q(s, z, y) dz` over the window.
#[allow(clippy::too_many_arguments)]
fn by_parts(
    f: &dyn Kernel,
    op: &Operator,
    q: &dyn Kernel,
    u: f64,
    s: f64,
    x: f64,
    y: f64,
    center: f64,
    half: f64,
    panels: usize,
) -> Result<(f64, f64, f64)> {
    let order = op.order();
    if op.is_constant() && f.analytic_derivatives() {
        let c = op.coefficients(center);
        return spatial(
            |z| {
                let d = f.y_derivatives(u, x, z, order)?;
                let lhs: f64 = (0..=order as usize).map(|n| sign(n) * c[n] * d[n]).sum();
                if lhs == 0.0 {
                    return Ok(0.0);
                }
                Ok(lhs * q.eval(s, z, y)?)
            },
            center,
            half,
            panels,
        );
    }
    let scheme = f.fd_scheme();
    let step = scheme.step(u)?;
    let reach = fd_reach(order);
    spatial(
        |z| {
            let width = (2 * reach + 1) as usize;
            let mut fz = Vec::with_capacity(width);
            let mut cz = Vec::with_capacity(width);
            for j in -reach..=reach {
                let zj = z + j as f64 * 0.5 * step;
                fz.push(f.eval(u, x, zj)?);
                cz.push(op.coefficients(zj));
            }
            let mut lhs = 0.0;
            for n in 0..=order as usize {
                if cz.iter().all(|c| c[n] == 0.0) {
                    continue;
                }
                let d = if n == 0 {
                    cz[reach as usize][0] * fz[reach as usize]
                } else {
                    fd_from_samples(
                        |j| {
                            let i = (j + reach) as usize;
                            Ok(cz[i][n] * fz[i])
                        },
                        step,
                        n as u32,
                        scheme.richardson,
                    )?[n]
                };
                lhs += sign(n) * d;
            }
            if lhs == 0.0 {
                return Ok(0.0);
            }
            Ok(lhs * q.eval(s, z, y)?)
        },
        center,
        half,
        panels,
    )
}

fn sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn spatial<F>(integrand: F, center: f64, half: f64, panels: usize) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    if half == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let est = composite_gk21(
        |z| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match integrand(z) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        center - half,
        center + half,
        panels,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((est.value, est.error, est.abs_value))
}

/// `f ⊗ g` as a kernel in its own right, evaluated on demand.
///
/// Derivatives are finite differences of whole convolutions, so the step is
/// kept coarse relative to the quadrature noise.
pub struct ConvolutionKernel<'a> {
    f: &'a dyn Kernel,
    g: &'a dyn Kernel,
    quad: ConvolutionQuad,
    scheme: DerivScheme,
    unconverged: AtomicBool,
}

impl<'a> ConvolutionKernel<'a> {
    pub fn new(f: &'a dyn Kernel, g: &'a dyn Kernel, quad: ConvolutionQuad, scheme: DerivScheme) -> Self {
        ConvolutionKernel {
            f,
            g,
            quad,
            scheme,
            unconverged: AtomicBool::new(false),
        }
    }

    /// True once any evaluation missed its tolerance.
    pub fn flagged(&self) -> bool {
        self.unconverged.load(Ordering::Relaxed)
    }
}

impl Kernel for ConvolutionKernel<'_> {
    fn eval(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        let c = convolve_detailed(self.f, self.g, t, x, y, &self.quad)?;
        if !c.converged {
            self.unconverged.store(true, Ordering::Relaxed);
        }
        Ok(c.value)
    }

    fn fd_scheme(&self) -> DerivScheme {
        self.scheme
    }

    fn spread(&self) -> f64 {
        self.f.spread().max(self.g.spread())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{closed_form_p_unit, BridgeConfig, TransitionDensity};
    use crate::edgeworth::kernel::{Applied, DensityKernel, ZeroKernel};
    use crate::models::CoefficientModel;
    use approx::assert_relative_eq;

    fn kernel(coeff: &CoefficientModel) -> DensityKernel {
        DensityKernel {
            density: TransitionDensity::new(coeff, &BridgeConfig::default()).unwrap(),
            scheme: DerivScheme::default(),
        }
    }

    #[test]
    fn chapman_kolmogorov_collapse() {
        let p = kernel(&CoefficientModel::unit());
        let q = ConvolutionQuad::default();
        let v = convolve_time_space(&p, &p, 1.0, 0.0, 1.0, &q).unwrap();
        assert_relative_eq!(v, closed_form_p_unit(1.0, 0.0, 1.0), max_relative = 1e-9);
        assert_relative_eq!(v, 0.398_942_3, max_relative = 1e-7);
        let ou = kernel(&CoefficientModel::ornstein_uhlenbeck(1.0, 0.8).unwrap());
        for (t, x, y) in [(0.3, 0.2, -0.4), (0.05, 1.0, 1.1)] {
            let v = convolve_time_space(&ou, &ou, t, x, y, &q).unwrap();
            assert_relative_eq!(v, t * ou.eval(t, x, y).unwrap(), max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let p = kernel(&CoefficientModel::unit());
        let v = convolve_time_space(&p, &ZeroKernel, 0.7, 0.0, 0.3, &ConvolutionQuad::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn third_derivative_matches_closed_form() {
        // p ⊗ F₁[p] = −(μ₃/6) t ∂ᵧ³p for constant coefficients.
        let p = kernel(&CoefficientModel::unit());
        let a = Applied {
            op: Operator::monomial(3, 1.0 / 6.0),
            inner: &p,
        };
        let q = ConvolutionQuad::default();
        for (t, dy) in [(1.0, 2.0), (0.1, 0.3), (0.04, -0.5)] {
            let v = convolve_time_space(&p, &a, t, 0.0, dy, &q).unwrap();
            let g = crate::density::GaussianTransition::of(&CoefficientModel::unit(), t).unwrap();
            let closed = -t / 6.0 * g.derivative_ratio(0.0, dy, 0, 3) * closed_form_p_unit(t, 0.0, dy);
            assert_relative_eq!(v, closed, max_relative = 1e-8);
        }
    }

    #[test]
    fn by_parts_with_differenced_density() {
        // Forcing finite differences on f must reproduce the analytic path.
        let coeff = CoefficientModel::ornstein_uhlenbeck(0.5, 1.0).unwrap();
        let exact = kernel(&coeff);
        let mut fd = kernel(&coeff);
        fd.scheme.force_fd = true;
        let op = || Operator::new(4, false, |z| [0.0, 0.1 * z, 0.0, 0.0, 0.05]);
        let q = ConvolutionQuad::default();
        let a = Applied {
            op: op(),
            inner: &exact,
        };
        let v = convolve_time_space(&exact, &a, 0.2, 0.1, 0.4, &q).unwrap();
        let b = Applied { op: op(), inner: &fd };
        // Difference noise is not polynomial, so the Kronrod–Gauss estimate may
        // exceed the tight default tolerance; only the value is compared.
        let w = convolve_detailed(&fd, &b, 0.2, 0.1, 0.4, &q).unwrap();
        assert_relative_eq!(v, w.value, max_relative = 1e-5);
        assert!(w.error < 1e-5 * w.abs_value);
    }

    #[test]
    fn rejects_bad_time() {
        let p = kernel(&CoefficientModel::unit());
        assert!(convolve_time_space(&p, &p, 0.0, 0.0, 0.0, &ConvolutionQuad::default()).is_err());
    }
}
