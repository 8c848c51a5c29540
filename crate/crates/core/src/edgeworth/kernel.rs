use crate::density::{fd_derivatives, DerivScheme, TransitionDensity};
use crate::error::Result;

/// A function `(t, x, y) → value`, the operand type of `⊗`.
pub trait Kernel: Send + Sync {
    fn eval(&self, t: f64, x: f64, y: f64) -> Result<f64>;

    /// `∂ₓⁿ` for `n = 0..=max_order` (backward argument).
    fn x_derivatives(&self, t: f64, x: f64, y: f64, max_order: u32) -> Result<Vec<f64>> {
        let step = self.fd_scheme().step(t)?;
        fd_derivatives(
            |xx| self.eval(t, xx, y),
            x,
            step,
            max_order,
            self.fd_scheme().richardson,
        )
    }

    /// `∂ᵧⁿ` for `n = 0..=max_order` (forward argument).
    fn y_derivatives(&self, t: f64, x: f64, y: f64, max_order: u32) -> Result<Vec<f64>> {
        let step = self.fd_scheme().step(t)?;
        fd_derivatives(
            |yy| self.eval(t, x, yy),
            y,
            step,
            max_order,
            self.fd_scheme().richardson,
        )
    }

    /// True when the derivative methods are exact rather than differenced.
    fn analytic_derivatives(&self) -> bool {
        false
    }

    /// Scheme used by the default derivative methods.
    fn fd_scheme(&self) -> DerivScheme {
        DerivScheme::default()
    }

    /// Upper bound on the diffusion scale, used to size spatial windows.
    fn spread(&self) -> f64 {
        1.0
    }

    /// `Some((A, q))` when the kernel is `A[q]` for a differential operator `A`.
    fn as_applied(&self) -> Option<(&Operator, &dyn Kernel)> {
        None
    }
}

/// The kernel that is identically zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroKernel;

impl Kernel for ZeroKernel {
    fn eval(&self, _t: f64, _x: f64, _y: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn x_derivatives(&self, _t: f64, _x: f64, _y: f64, max_order: u32) -> Result<Vec<f64>> {
        Ok(vec![0.0; max_order as usize + 1])
    }

    fn y_derivatives(&self, _t: f64, _x: f64, _y: f64, max_order: u32) -> Result<Vec<f64>> {
        Ok(vec![0.0; max_order as usize + 1])
    }

    fn analytic_derivatives(&self) -> bool {
        true
    }
}

/// The diffusion transition density as a kernel.
#[derive(Debug, Clone)]
pub struct DensityKernel {
    pub density: TransitionDensity,
    pub scheme: DerivScheme,
}

impl Kernel for DensityKernel {
    fn eval(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        self.density.value(t, x, y)
    }

    fn x_derivatives(&self, t: f64, x: f64, y: f64, max_order: u32) -> Result<Vec<f64>> {
        self.density.x_derivatives(t, x, y, max_order, &self.scheme)
    }

    fn y_derivatives(&self, t: f64, x: f64, y: f64, max_order: u32) -> Result<Vec<f64>> {
        if self.density.is_closed_form() {
            let p = self.density.value(t, x, y)?;
            let c = self.density.coefficients();
            let g = crate::density::GaussianTransition::of(c, t).expect("closed form");
            return Ok((0..=max_order).map(|n| g.derivative_ratio(x, y, 0, n) * p).collect());
        }
        let step = self.scheme.step(t)?;
        fd_derivatives(
            |yy| self.density.value(t, x, yy),
            y,
            step,
            max_order,
            self.scheme.richardson,
        )
    }

    fn analytic_derivatives(&self) -> bool {
        self.density.is_closed_form()
    }

    fn fd_scheme(&self) -> DerivScheme {
        self.scheme
    }

    fn spread(&self) -> f64 {
        self.density.coefficients().variance_bounds().1.sqrt()
    }
}

/// `Σₙ cₙ(x) ∂ₓⁿ` with `n ≤ 4`, acting on the backward argument.
pub struct Operator {
    order: u32,
    coeffs: Box<dyn Fn(f64) -> [f64; 5] + Send + Sync>,
    constant: bool,
}

impl std::fmt::Debug for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Operator")
            .field("order", &self.order)
            .field("constant", &self.constant)
            .finish()
    }
}

impl Operator {
    pub fn new<F>(order: u32, constant: bool, coeffs: F) -> Self
    where
        F: Fn(f64) -> [f64; 5] + Send + Sync + 'static,
    {
        assert!(order <= 4, "operators of order > 4 are not supported");
        Operator {
            order,
            coeffs: Box::new(coeffs),
            constant,
        }
    }

    pub fn identity() -> Self {
        Operator::new(0, true, |_| [1.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// `c ∂ⁿ` with a constant `c`.
    pub fn monomial(order: u32, c: f64) -> Self {
        Operator::new(order, true, move |_| {
            let mut a = [0.0; 5];
            a[order as usize] = c;
            a
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn coefficients(&self, x: f64) -> [f64; 5] {
        (self.coeffs)(x)
    }
}

/// `A[f](t, x, y) = Σₙ cₙ(x) ∂ₓⁿ f(t, x, y)`.
pub struct Applied<'a> {
    pub op: Operator,
    pub inner: &'a dyn Kernel,
}

impl Kernel for Applied<'_> {
    fn eval(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        let c = self.op.coefficients(x);
        let d = self.inner.x_derivatives(t, x, y, self.op.order())?;
        Ok(d.iter().zip(c.iter()).map(|(a, b)| a * b).sum())
    }

    fn fd_scheme(&self) -> DerivScheme {
        self.inner.fd_scheme()
    }

    fn spread(&self) -> f64 {
        self.inner.spread()
    }

    fn as_applied(&self) -> Option<(&Operator, &dyn Kernel)> {
        Some((&self.op, self.inner))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::BridgeConfig;
    use crate::models::CoefficientModel;

    #[test]
    fn applied_monomial_matches_derivative() {
        let k = DensityKernel {
            density: TransitionDensity::new(&CoefficientModel::unit(), &BridgeConfig::default()).unwrap(),
            scheme: DerivScheme::default(),
        };
        let a = Applied {
            op: Operator::monomial(3, 1.0 / 6.0),
            inner: &k,
        };
        // F₁[p](1, 0, 2) with μ₃ = 1 is −∂ᵧ³p/6.
        assert!((a.eval(1.0, 0.0, 2.0).unwrap() + 0.483_941_449_038_286_7 / 6.0).abs() < 1e-14);
        assert!((a.eval(1.0, 0.0, 2.0).unwrap() + 0.080_656_9).abs() < 1e-7);
        let fd = a.x_derivatives(1.0, 0.0, 2.0, 1).unwrap();
        assert!((fd[0] - a.eval(1.0, 0.0, 2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn zero_operator_gives_zero() {
        let k = DensityKernel {
            density: TransitionDensity::new(&CoefficientModel::unit(), &BridgeConfig::default()).unwrap(),
            scheme: DerivScheme::default(),
        };
        let a = Applied {
            op: Operator::monomial(4, 0.0),
            inner: &k,
        };
        assert_eq!(a.eval(0.3, 0.1, -0.2).unwrap(), 0.0);
    }
}
