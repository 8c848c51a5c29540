//! One-dimensional quadrature.
//!
//! Adaptive Gauss–Kronrod (10/21 point) bisection for general integrands,
//! fixed composite Gauss–Kronrod panels for integrands that must depend
//! smoothly on their parameters, and Gauss–Legendre node generation.

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Absolute/relative tolerance pair with a subdivision budget.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-8,
            max_panels: 500,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            ..Default::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Value of an integral together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
    /// Integral of |f|, useful as a scale when the value itself cancels.
    pub abs_value: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut abs_value = WGK[10] * fc.abs();
    let mut gauss = 0.0;
    for (j, (&x, &w)) in XGK[..10].iter().zip(WGK[..10].iter()).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += w * (f1 + f2);
        abs_value += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
        abs_value: abs_value * half.abs(),
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadEstimate> {
    if a == b {
        return Ok(QuadEstimate {
            value: 0.0,
            error: 0.0,
            abs_value: 0.0,
            panels: 0,
        });
    }
    let mut panels = vec![gk21(&f, a, b)];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let abs_value: f64 = panels.iter().map(|p| p.abs_value).sum();
        if error <= tol.target(value) || !value.is_finite() {
            if !value.is_finite() {
                return Err(Error::Quadrature {
                    estimate: value,
                    error,
                    tolerance: tol.target(value),
                });
            }
            return Ok(QuadEstimate {
                value,
                error,
                abs_value,
                panels: panels.len(),
            });
        }
        if panels.len() >= tol.max_panels {
            return Err(Error::Quadrature {
                estimate: value,
                error,
                tolerance: tol.target(value),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a.min(p.b) || mid >= p.a.max(p.b) {
            // Interval exhausted in floating point.
            return Err(Error::Quadrature {
                estimate: value,
                error,
                tolerance: tol.target(value),
            });
        }
        panels.push(gk21(&f, p.a, mid));
        panels.push(gk21(&f, mid, p.b));
    }
}

/// Integral over the real line, truncated to `center ± width * scale`.
pub fn integrate_line<F: Fn(f64) -> f64>(
    f: F,
    center: f64,
    scale: f64,
    width: f64,
    tol: Tolerance,
) -> Result<QuadEstimate> {
    let half = width * scale;
    // Split at the center so a peak there never falls between nodes.
    let left = integrate(&f, center - half, center, tol)?;
    let right = integrate(&f, center, center + half, tol)?;
    Ok(QuadEstimate {
        value: left.value + right.value,
        error: left.error + right.error,
        abs_value: left.abs_value + right.abs_value,
        panels: left.panels + right.panels,
    })
}

/// Non-adaptive composite 21-point Kronrod rule on `panels` equal pieces.
///
/// The nodes move continuously with `a` and `b`, so the result is a smooth
/// function of any parameter the integrand or limits depend on.
pub fn composite_gk21<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> QuadEstimate {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut out = QuadEstimate {
        value: 0.0,
        error: 0.0,
        abs_value: 0.0,
        panels,
    };
    for i in 0..panels {
        let lo = a + width * i as f64;
        let p = gk21(&f, lo, lo + width);
        out.value += p.value;
        out.error += p.error;
        out.abs_value += p.abs_value;
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Trapezoid rule on equally spaced samples.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => spacing * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kronrod_integrates_polynomials_exactly() {
        let est = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert_abs_diff_eq!(est.value, 256.0 / 8.0 - 8.0, epsilon = 1e-12);
        assert_eq!(est.panels, 1);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let est = integrate(|x: f64| x.sqrt(), 0.0, 1.0, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert_abs_diff_eq!(est.value, 2.0 / 3.0, epsilon = 1e-11);
    }

    #[test]
    fn gaussian_on_truncated_line() {
        let est = integrate_line(
            |x: f64| (-0.5 * x * x).exp(),
            0.0,
            1.0,
            12.0,
            Tolerance::new(1e-14, 1e-12),
        )
        .unwrap();
        assert_abs_diff_eq!(est.value, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let tol = Tolerance {
            abs: 1e-300,
            rel: 0.0,
            max_panels: 4,
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn legendre_rule_moments() {
        for n in [1, 2, 5, 32, 64] {
            let rule = GaussLegendre::new(n);
            let total: f64 = rule.mapped(-1.0, 1.0).map(|(_, w)| w).sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
            // Exact for degree 2n - 1.
            let deg = 2 * n - 1;
            let v = rule.integrate(|x| x.powi(deg as i32 - 1), 0.0, 1.0);
            assert_abs_diff_eq!(v, 1.0 / deg as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn trapezoid_linear_is_exact() {
        let v: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 * 0.1 + 1.0).collect();
        assert_abs_diff_eq!(trapezoid(&v, 0.1), 2.0, epsilon = 1e-13);
    }
}
