use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bridge::{check_time, BridgeConfig, DcfzDensity};
use super::closed::GaussianTransition;
use super::{DensityEstimate, Method};
use crate::error::{Error, Result};
use crate::models::CoefficientModel;

/// `∂ₓ^dx ∂ᵧ^dy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partial {
    pub dx: u32,
    pub dy: u32,
}

impl Partial {
    pub const fn x(order: u32) -> Self {
        Partial { dx: order, dy: 0 }
    }

    pub const fn y(order: u32) -> Self {
        Partial { dx: 0, dy: order }
    }

    pub fn order(&self) -> u32 {
        self.dx + self.dy
    }

    /// Parses `x`, `y`, `xx`, `yyy`, `dx3`, `dy4` style names.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.is_empty() {
            return None;
        }
        if let Some(rest) = s.strip_prefix("dx").or_else(|| s.strip_prefix("d_x")) {
            return rest.parse().ok().map(Partial::x);
        }
        if let Some(rest) = s.strip_prefix("dy").or_else(|| s.strip_prefix("d_y")) {
            return rest.parse().ok().map(Partial::y);
        }
        let (dx, dy) = s.chars().try_fold((0, 0), |(a, b), c| match c {
            'x' => Some((a + 1, b)),
            'y' => Some((a, b + 1)),
            _ => None,
        })?;
        Some(Partial { dx, dy })
    }
}

/// Central finite differences with one Richardson level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DerivScheme {
    /// Step is `max(min_step, rel_step · √t)`.
    pub rel_step: f64,
    pub min_step: f64,
    pub richardson: bool,
    /// Use differences even where closed forms exist.
    pub force_fd: bool,
}

impl Default for DerivScheme {
    fn default() -> Self {
        DerivScheme {
            rel_step: 1e-2,
            min_step: 1e-4,
            richardson: true,
            force_fd: false,
        }
    }
}

impl DerivScheme {
    pub fn step(&self, t: f64) -> Result<f64> {
        let step = self.min_step.max(self.rel_step * t.sqrt());
        if step > 0.25 * t.sqrt() || !(step > 0.0) {
            return Err(Error::StepUnderflow { step, t });
        }
        Ok(step)
    }
}

/// Central-difference weights on offsets `-3..=3` (second-order accurate).
fn stencil(order: u32) -> Option<[f64; 7]> {
    Some(match order {
        0 => [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        1 => [0.0, 0.0, -0.5, 0.0, 0.5, 0.0, 0.0],
        2 => [0.0, 0.0, 1.0, -2.0, 1.0, 0.0, 0.0],
        3 => [0.0, -0.5, 1.0, 0.0, -1.0, 0.5, 0.0],
        4 => [0.0, 1.0, -4.0, 6.0, -4.0, 1.0, 0.0],
        5 => [-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5],
        6 => [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0],
        _ => return None,
    })
}

/// Derivatives of orders `0..=max_order` (at most 6) from samples on the
/// half-step lattice: `sample(j)` is the function at `x + j·step/2`.
pub fn fd_from_samples<S>(mut sample: S, step: f64, max_order: u32, richardson: bool) -> Result<Vec<f64>>
where
    S: FnMut(i32) -> Result<f64>,
{
    if max_order > 6 {
        return Err(Error::InvalidParameter(format!(
            "finite differences support order <= 6, got {max_order}"
        )));
    }
    let reach = stencil_reach(max_order);
    let mut coarse = vec![0.0; max_order as usize + 1];
    let mut fine = vec![0.0; max_order as usize + 1];
    for (scale, out) in [(2i32, &mut coarse), (1i32, &mut fine)] {
        if scale == 1 && !richardson {
            break;
        }
        let hh = 0.5 * step * scale as f64;
        let mut vals = [0.0; 7];
        for off in -reach..=reach {
            vals[(off + 3) as usize] = sample(off * scale)?;
        }
        for n in 0..=max_order {
            let w = stencil(n).expect("order checked above");
            let s: f64 = w.iter().zip(&vals).map(|(a, b)| a * b).sum();
            out[n as usize] = s / hh.powi(n as i32);
        }
    }
    if !richardson {
        return Ok(coarse);
    }
    Ok(coarse
        .iter()
        .zip(&fine)
        .enumerate()
        .map(|(n, (c, f))| if n == 0 { *f } else { (4.0 * f - c) / 3.0 })
        .collect())
}

/// Half-width, in half steps, of the lattice [`fd_from_samples`] reads.
pub fn fd_reach(max_order: u32) -> i32 {
    2 * stencil_reach(max_order)
}

fn stencil_reach(max_order: u32) -> i32 {
    match max_order {
        0 => 0,
        1 | 2 => 1,
        3 | 4 => 2,
        _ => 3,
    }
}

/// Derivatives of orders `0..=max_order` (at most 6) of `f` at `x`,
/// sharing function evaluations between orders and Richardson levels.
pub fn fd_derivatives<F>(f: F, x: f64, step: f64, max_order: u32, richardson: bool) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut cache: [Option<f64>; 13] = [None; 13];
    fd_from_samples(
        |j| {
            let idx = (j + 6) as usize;
            if let Some(v) = cache[idx] {
                return Ok(v);
            }
            let v = f(x + j as f64 * 0.5 * step)?;
            cache[idx] = Some(v);
            Ok(v)
        },
        step,
        max_order,
        richardson,
    )
}

/// One derivative of order `order` by central differences.
pub fn fd_derivative<F>(f: F, x: f64, step: f64, order: u32, richardson: bool) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok(fd_derivatives(f, x, step, order, richardson)?[order as usize])
}

/// Transition density `p(t, x, y)` of a coefficient model, evaluated in
/// closed form when the transition law is Gaussian and from the bridge
/// representation otherwise.
#[derive(Debug, Clone)]
pub enum TransitionDensity {
    Gaussian(CoefficientModel),
    Bridge(Arc<DcfzDensity>),
}

impl TransitionDensity {
    pub fn new(coeff: &CoefficientModel, bridge: &BridgeConfig) -> Result<Self> {
        if GaussianTransition::of(coeff, 1.0).is_some() {
            Ok(TransitionDensity::Gaussian(coeff.clone()))
        } else {
            Ok(TransitionDensity::Bridge(Arc::new(DcfzDensity::new(coeff, *bridge)?)))
        }
    }

    pub fn coefficients(&self) -> &CoefficientModel {
        match self {
            TransitionDensity::Gaussian(c) => c,
            TransitionDensity::Bridge(d) => d.coefficients(),
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, TransitionDensity::Gaussian(_))
    }

    pub fn ln_value(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        check_time(t)?;
        match self {
            TransitionDensity::Gaussian(c) => Ok(GaussianTransition::of(c, t).expect("gaussian").ln_p(x, y)),
            TransitionDensity::Bridge(d) => d.ln_value(t, x, y),
        }
    }

    pub fn value(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Ok(self.ln_value(t, x, y)?.exp())
    }

    pub fn estimate(&self, t: f64, x: f64, y: f64) -> Result<DensityEstimate> {
        match self {
            TransitionDensity::Gaussian(_) => Ok(DensityEstimate {
                value: self.value(t, x, y)?,
                stderr: 0.0,
                method: Method::ClosedForm,
                flagged: false,
            }),
            TransitionDensity::Bridge(d) => d.estimate(t, x, y),
        }
    }

    /// `∂ₓᵃ∂ᵧᵇ p(t, x, y)`.
    pub fn derivative(&self, t: f64, x: f64, y: f64, which: Partial, scheme: &DerivScheme) -> Result<f64> {
        check_time(t)?;
        if let (TransitionDensity::Gaussian(c), false) = (self, scheme.force_fd) {
            let g = GaussianTransition::of(c, t).expect("gaussian");
            return Ok(g.derivative_ratio(x, y, which.dx, which.dy) * g.ln_p(x, y).exp());
        }
        let step = scheme.step(t)?;
        let in_y = |xx: f64| fd_derivative(|yy| self.value(t, xx, yy), y, step, which.dy, scheme.richardson);
        if which.dx == 0 {
            return in_y(x);
        }
        fd_derivative(in_y, x, step, which.dx, scheme.richardson)
    }

    /// `∂ₓⁿ p(t, x, y)` for `n = 0..=max_order`.
    pub fn x_derivatives(&self, t: f64, x: f64, y: f64, max_order: u32, scheme: &DerivScheme) -> Result<Vec<f64>> {
        check_time(t)?;
        if let (TransitionDensity::Gaussian(c), false) = (self, scheme.force_fd) {
            let g = GaussianTransition::of(c, t).expect("gaussian");
            let p = g.ln_p(x, y).exp();
            return Ok((0..=max_order).map(|n| g.derivative_ratio(x, y, n, 0) * p).collect());
        }
        fd_derivatives(
            |xx| self.value(t, xx, y),
            x,
            scheme.step(t)?,
            max_order,
            scheme.richardson,
        )
    }
}

/// `∂ₓᵃ∂ᵧᵇ p(t, x, y)`: closed form for Gaussian transition laws, finite
/// differences otherwise.
pub fn p_derivative(
    coeff: &CoefficientModel,
    t: f64,
    x: f64,
    y: f64,
    which: Partial,
    scheme: &DerivScheme,
) -> Result<f64> {
    TransitionDensity::new(coeff, &BridgeConfig::default())?.derivative(t, x, y, which, scheme)
}
