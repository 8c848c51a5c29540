//! Lamperti transform `S`, the potential `H` and the bridge potential `g`.
//!
//! `C`, `C'` and `g` are functions of the transformed coordinate `u = S(x)`:
//! in those coordinates the diffusion has unit volatility and drift
//! `C(u) = m(x)/σ(x) − σ'(x)/2`, evaluated at `x = S⁻¹(u)`.

use super::coefficients::CoefficientModel;
use crate::error::Result;
use crate::quadrature::{integrate, Tolerance};

fn tol() -> Tolerance {
    Tolerance::new(1e-13, 1e-12)
}

/// `S(x) = ∫₀ˣ du / σ(u)`.
pub fn lamperti_s(coeff: &CoefficientModel, x: f64) -> Result<f64> {
    if let Some(s) = coeff.constant_sigma() {
        return Ok(x / s);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(integrate(|v| 1.0 / coeff.sigma(v), 0.0, x, tol())?.value)
}

/// `S⁻¹(u)` by safeguarded Newton iteration.
pub fn lamperti_inverse(coeff: &CoefficientModel, u: f64) -> Result<f64> {
    if let Some(s) = coeff.constant_sigma() {
        return Ok(u * s);
    }
    let (lo, hi) = coeff.variance_bounds();
    let (smin, smax) = (lo.sqrt(), hi.sqrt());
    // S is increasing with slope in [1/smax, 1/smin], so the root is bracketed.
    let (mut a, mut b) = if u >= 0.0 {
        (u * smin, u * smax)
    } else {
        (u * smax, u * smin)
    };
    let mut x = u * coeff.sigma(0.0);
    x = x.clamp(a, b);
    for _ in 0..100 {
        let r = lamperti_s(coeff, x)? - u;
        if r.abs() < 1e-13 * (1.0 + u.abs()) {
            return Ok(x);
        }
        if r > 0.0 {
            b = x;
        } else {
            a = x;
        }
        let mut next = x - r * coeff.sigma(x);
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        x = next;
    }
    Ok(x)
}

/// Drift of the transformed diffusion at `x` (not at `u`).
fn c_at_x(coeff: &CoefficientModel, x: f64) -> f64 {
    coeff.drift(x) / coeff.sigma(x) - 0.5 * coeff.sigma_d1(x)
}

/// `dC/du` at `x = S⁻¹(u)`.
fn c_prime_at_x(coeff: &CoefficientModel, x: f64) -> f64 {
    let (m, m1) = (coeff.drift(x), coeff.drift_d1(x));
    let (s, s1, s2) = (coeff.sigma(x), coeff.sigma_d1(x), coeff.sigma_d2(x));
    s * ((m1 * s - m * s1) / (s * s) - 0.5 * s2)
}

fn g_at_x(coeff: &CoefficientModel, x: f64) -> f64 {
    let c = c_at_x(coeff, x);
    -0.5 * (c * c + c_prime_at_x(coeff, x))
}

/// `C(u)`.
pub fn drift_potential_c(coeff: &CoefficientModel, u: f64) -> Result<f64> {
    Ok(c_at_x(coeff, lamperti_inverse(coeff, u)?))
}

/// `C'(u)`.
pub fn drift_potential_c_prime(coeff: &CoefficientModel, u: f64) -> Result<f64> {
    Ok(c_prime_at_x(coeff, lamperti_inverse(coeff, u)?))
}

/// `g(u) = −(C(u)² + C'(u)) / 2`.
pub fn potential_g(coeff: &CoefficientModel, u: f64) -> Result<f64> {
    Ok(g_at_x(coeff, lamperti_inverse(coeff, u)?))
}

/// `H(x) = ∫₀^{S(x)} C(u) du = ∫₀ˣ (m/σ² − σ'/(2σ)) dv`.
pub fn transform_h(coeff: &CoefficientModel, x: f64) -> Result<f64> {
    match coeff {
        CoefficientModel::Constant { drift, sigma } => return Ok(drift * x / (sigma * sigma)),
        CoefficientModel::OrnsteinUhlenbeck { rate, sigma } => return Ok(-rate * x * x / (2.0 * sigma * sigma)),
        _ => {}
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(integrate(|v| h_density(coeff, v), 0.0, x, tol())?.value)
}

fn h_density(coeff: &CoefficientModel, v: f64) -> f64 {
    let s = coeff.sigma(v);
    coeff.drift(v) / (s * s) - 0.5 * coeff.sigma_d1(v) / s
}

const TABLE_HALF_WIDTH: f64 = 20.0;
const TABLE_CELLS_PER_UNIT: usize = 128;

#[derive(Debug, Clone)]
enum MapKind {
    /// Constant `σ`: everything is closed form.
    Analytic,
    Table(Box<Tables>),
}

#[derive(Debug, Clone)]
struct Tables {
    x0: f64,
    dx: f64,
    s: Vec<f64>,
    h: Vec<f64>,
    u0: f64,
    du: f64,
    g: Vec<f64>,
}

/// `S`, `S⁻¹`, `H` and `g` for repeated evaluation.
///
/// Non-constant `σ` is tabulated once on `[-20, 20]` (cubic Hermite
/// interpolation for `S` and `H`, four-point Lagrange for `g`), falling
/// back to direct quadrature outside the table.
#[derive(Debug, Clone)]
pub struct LampertiMap {
    coeff: CoefficientModel,
    kind: MapKind,
}

impl LampertiMap {
    pub fn new(coeff: &CoefficientModel) -> Result<Self> {
        if coeff.constant_sigma().is_some() {
            return Ok(LampertiMap {
                coeff: coeff.clone(),
                kind: MapKind::Analytic,
            });
        }
        let cells = 2 * TABLE_HALF_WIDTH as usize * TABLE_CELLS_PER_UNIT;
        let dx = 1.0 / TABLE_CELLS_PER_UNIT as f64;
        let x0 = -TABLE_HALF_WIDTH;
        let xs: Vec<f64> = (0..=cells).map(|i| x0 + i as f64 * dx).collect();
        let mid = cells / 2;
        let mut s = vec![0.0; cells + 1];
        let mut h = vec![0.0; cells + 1];
        for i in mid + 1..=cells {
            s[i] = s[i - 1] + integrate(|v| 1.0 / coeff.sigma(v), xs[i - 1], xs[i], tol())?.value;
            h[i] = h[i - 1] + integrate(|v| h_density(coeff, v), xs[i - 1], xs[i], tol())?.value;
        }
        for i in (0..mid).rev() {
            s[i] = s[i + 1] - integrate(|v| 1.0 / coeff.sigma(v), xs[i], xs[i + 1], tol())?.value;
            h[i] = h[i + 1] - integrate(|v| h_density(coeff, v), xs[i], xs[i + 1], tol())?.value;
        }
        let mut tables = Tables {
            x0,
            dx,
            s,
            h,
            u0: 0.0,
            du: dx,
            g: Vec::new(),
        };
        let mut map = LampertiMap {
            coeff: coeff.clone(),
            kind: MapKind::Analytic,
        };
        let (umin, umax) = (tables.s[0], tables.s[cells]);
        let ucells = ((umax - umin) / tables.du).floor() as usize;
        tables.u0 = umin;
        map.kind = MapKind::Table(Box::new(tables.clone()));
        let mut gv = Vec::with_capacity(ucells + 1);
        for j in 0..=ucells {
            let x = map.inverse(umin + j as f64 * tables.du)?;
            gv.push(g_at_x(coeff, x));
        }
        tables.g = gv;
        map.kind = MapKind::Table(Box::new(tables));
        Ok(map)
    }

    pub fn coefficients(&self) -> &CoefficientModel {
        &self.coeff
    }

    /// True when `g` does not depend on `u`, so the bridge factor is `exp(t g)`.
    pub fn constant_g(&self) -> Option<f64> {
        match self.coeff {
            CoefficientModel::Constant { drift, sigma } => Some(-0.5 * (drift / sigma).powi(2)),
            _ => None,
        }
    }

    fn cell(t: &Tables, x: f64) -> Option<(usize, f64)> {
        let pos = (x - t.x0) / t.dx;
        let n = t.s.len() - 1;
        if !(pos >= 0.0 && pos <= n as f64) {
            return None;
        }
        let i = (pos.floor() as usize).min(n - 1);
        Some((i, pos - i as f64))
    }

    fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, dx: f64, r: f64) -> f64 {
        let r2 = r * r;
        let r3 = r2 * r;
        (2.0 * r3 - 3.0 * r2 + 1.0) * y0
            + (r3 - 2.0 * r2 + r) * dx * d0
            + (-2.0 * r3 + 3.0 * r2) * y1
            + (r3 - r2) * dx * d1
    }

    pub fn s(&self, x: f64) -> Result<f64> {
        match &self.kind {
            MapKind::Analytic => lamperti_s(&self.coeff, x),
            MapKind::Table(t) => match Self::cell(t, x) {
                Some((i, r)) => {
                    let x0 = t.x0 + i as f64 * t.dx;
                    let d0 = 1.0 / self.coeff.sigma(x0);
                    let d1 = 1.0 / self.coeff.sigma(x0 + t.dx);
                    Ok(Self::hermite(t.s[i], t.s[i + 1], d0, d1, t.dx, r))
                }
                None => lamperti_s(&self.coeff, x),
            },
        }
    }

    pub fn h(&self, x: f64) -> Result<f64> {
        match &self.kind {
            MapKind::Analytic => transform_h(&self.coeff, x),
            MapKind::Table(t) => match Self::cell(t, x) {
                Some((i, r)) => {
                    let x0 = t.x0 + i as f64 * t.dx;
                    let d0 = h_density(&self.coeff, x0);
                    let d1 = h_density(&self.coeff, x0 + t.dx);
                    Ok(Self::hermite(t.h[i], t.h[i + 1], d0, d1, t.dx, r))
                }
                None => transform_h(&self.coeff, x),
            },
        }
    }

    /// `S⁻¹(u)`, by Newton iteration on the interpolated `S`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        let t = match &self.kind {
            MapKind::Analytic => return lamperti_inverse(&self.coeff, u),
            MapKind::Table(t) => t,
        };
        let n = t.s.len() - 1;
        if !(u >= t.s[0] && u <= t.s[n]) {
            return lamperti_inverse(&self.coeff, u);
        }
        let i = t.s.partition_point(|&v| v <= u).clamp(1, n) - 1;
        let (mut a, mut b) = (t.x0 + i as f64 * t.dx, t.x0 + (i + 1) as f64 * t.dx);
        let mut x = a + (u - t.s[i]) / (t.s[i + 1] - t.s[i]) * t.dx;
        for _ in 0..60 {
            let r = self.s(x)? - u;
            if r.abs() < 1e-14 * (1.0 + u.abs()) {
                break;
            }
            if r > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let mut next = x - r * self.coeff.sigma(x);
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if next == x {
                break;
            }
            x = next;
        }
        Ok(x)
    }

    /// `g(u)`.
    pub fn g(&self, u: f64) -> f64 {
        match (&self.kind, &self.coeff) {
            (MapKind::Analytic, CoefficientModel::Constant { drift, sigma }) => -0.5 * (drift / sigma).powi(2),
            (MapKind::Analytic, CoefficientModel::OrnsteinUhlenbeck { rate, .. }) => {
                -0.5 * (rate * rate * u * u - rate)
            }
            (MapKind::Analytic, _) => g_at_x(&self.coeff, u * self.coeff.sigma(0.0)),
            (MapKind::Table(t), _) => {
                let pos = (u - t.u0) / t.du;
                let n = t.g.len() - 1;
                if !(pos >= 1.0 && pos <= (n - 2) as f64) {
                    return potential_g(&self.coeff, u).unwrap_or(f64::NAN);
                }
                let i = (pos.floor() as usize).min(n - 2);
                let r = pos - i as f64;
                // Lagrange on nodes i-1, i, i+1, i+2 at offsets -1, 0, 1, 2.
                let (a, b, c, d) = (t.g[i - 1], t.g[i], t.g[i + 1], t.g[i + 2]);
                -a * r * (r - 1.0) * (r - 2.0) / 6.0 + b * (r + 1.0) * (r - 1.0) * (r - 2.0) / 2.0
                    - c * (r + 1.0) * r * (r - 2.0) / 2.0
                    + d * (r + 1.0) * r * (r - 1.0) / 6.0
            }
        }
    }

    /// `sup |g|` over `u = S(x)` for the given `x`.
    pub fn g_bound(&self, xs: &[f64]) -> Result<f64> {
        let mut m: f64 = 0.0;
        for &x in xs {
            m = m.max(self.g(self.s(x)?).abs());
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sine_drift() -> CoefficientModel {
        CoefficientModel::smooth(1.0, 0.0).unwrap()
    }

    #[test]
    fn s_trivial_cases() {
        assert_eq!(lamperti_s(&CoefficientModel::unit(), 2.0).unwrap(), 2.0);
        let two = CoefficientModel::constant(0.0, 2.0).unwrap();
        assert_eq!(lamperti_s(&two, 3.0).unwrap(), 1.5);
    }

    #[test]
    fn s_matches_fine_trapezoid() {
        let coeff = CoefficientModel::smooth(0.0, 0.5).unwrap();
        let panels = 1_000_000;
        let dx = 1.0 / panels as f64;
        let mut sum = 0.5 * (1.0 / coeff.sigma(0.0) + 1.0 / coeff.sigma(1.0));
        for i in 1..panels {
            sum += 1.0 / coeff.sigma(i as f64 * dx);
        }
        let oracle = sum * dx;
        assert_abs_diff_eq!(lamperti_s(&coeff, 1.0).unwrap(), oracle, epsilon = 1e-8);
    }

    #[test]
    fn c_and_g_examples() {
        let unit = CoefficientModel::unit();
        assert_abs_diff_eq!(drift_potential_c(&unit, 0.7).unwrap(), 1.0);
        assert_abs_diff_eq!(potential_g(&unit, 0.7).unwrap(), -0.5);
        let zero = CoefficientModel::zero_drift();
        for u in [-3.0, 0.0, 2.5] {
            assert_eq!(drift_potential_c(&zero, u).unwrap(), 0.0);
            assert_eq!(potential_g(&zero, u).unwrap(), 0.0);
        }
        let sine = sine_drift();
        assert_abs_diff_eq!(drift_potential_c(&sine, 0.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(drift_potential_c_prime(&sine, 0.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(potential_g(&sine, 0.0).unwrap(), -0.5, epsilon = 1e-14);
    }

    #[test]
    fn h_examples() {
        assert_abs_diff_eq!(transform_h(&CoefficientModel::unit(), 1.0).unwrap(), 1.0);
        assert_eq!(transform_h(&CoefficientModel::zero_drift(), 4.2).unwrap(), 0.0);
        let closed = 1.0 - 1f64.cos();
        assert_abs_diff_eq!(transform_h(&sine_drift(), 1.0).unwrap(), closed, epsilon = 1e-12);
        assert_abs_diff_eq!(closed, 0.45970, epsilon = 5e-6);
    }

    #[test]
    fn h_equals_integral_of_c_in_transformed_coordinates() {
        let coeff = CoefficientModel::smooth(0.3, 0.3).unwrap();
        for x in [-1.5, 0.4, 2.0] {
            let sx = lamperti_s(&coeff, x).unwrap();
            let via_c = integrate(
                |u| drift_potential_c(&coeff, u).unwrap(),
                0.0,
                sx,
                Tolerance::new(1e-12, 1e-10),
            )
            .unwrap()
            .value;
            assert_abs_diff_eq!(transform_h(&coeff, x).unwrap(), via_c, epsilon = 1e-9);
        }
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let coeff = CoefficientModel::smooth(0.3, 0.3).unwrap();
        let map = LampertiMap::new(&coeff).unwrap();
        for i in -40..=40 {
            let x = 0.173 * i as f64;
            let s = map.s(x).unwrap();
            assert_abs_diff_eq!(s, lamperti_s(&coeff, x).unwrap(), epsilon = 1e-10);
            assert_abs_diff_eq!(map.h(x).unwrap(), transform_h(&coeff, x).unwrap(), epsilon = 1e-10);
            assert_abs_diff_eq!(map.inverse(s).unwrap(), x, epsilon = 1e-10);
            assert_abs_diff_eq!(map.g(s), potential_g(&coeff, s).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn analytic_maps() {
        let ou = CoefficientModel::ornstein_uhlenbeck(1.5, 2.0).unwrap();
        let map = LampertiMap::new(&ou).unwrap();
        for u in [-1.0, 0.3, 2.0] {
            assert_abs_diff_eq!(map.g(u), potential_g(&ou, u).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(map.inverse(u).unwrap(), 2.0 * u, epsilon = 1e-14);
        }
        assert_eq!(
            LampertiMap::new(&CoefficientModel::unit()).unwrap().constant_g(),
            Some(-0.5)
        );
    }

    proptest! {
        #[test]
        fn s_is_strictly_increasing(x1 in -6.0f64..6.0, dx in 1e-3f64..3.0, b in -0.9f64..0.9) {
            let coeff = CoefficientModel::smooth(0.3, b).unwrap();
            prop_assert!(lamperti_s(&coeff, x1).unwrap() < lamperti_s(&coeff, x1 + dx).unwrap());
        }

        #[test]
        fn g_matches_finite_difference_c_prime(u in -4.0f64..4.0, a in -1.0f64..1.0, b in -0.8f64..0.8) {
            let coeff = CoefficientModel::smooth(a, b).unwrap();
            let e = 1e-4;
            let cp = (drift_potential_c(&coeff, u + e).unwrap() - drift_potential_c(&coeff, u - e).unwrap()) / (2.0 * e);
            let c = drift_potential_c(&coeff, u).unwrap();
            let g_fd = -0.5 * (c * c + cp);
            prop_assert!((potential_g(&coeff, u).unwrap() - g_fd).abs() < 1e-5);
        }
    }
}
