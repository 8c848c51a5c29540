use serde::{Deserialize, Serialize};

use super::coefficients::CoefficientModel;
use super::grid::GridSpec;
use super::innovation::InnovationModel;
use super::lamperti::LampertiMap;
use crate::error::Result;

/// Probe grid and constants used by [`validate_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    /// Exponent `ϰ < 1/5` in `C⁻¹ k^{−ϰ} < hk < C`.
    pub kappa: f64,
    /// Constant `C` in the same bound.
    pub c: f64,
    /// Tolerance for the quadrature checks of mean and mass.
    pub moment_tolerance: f64,
    /// Derivatives larger than this count as unbounded.
    pub derivative_cap: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            x_min: -5.0,
            x_max: 5.0,
            points: 41,
            kappa: 0.19,
            c: 10.0,
            moment_tolerance: 1e-8,
            derivative_cap: 1e6,
        }
    }
}

impl ProbeConfig {
    pub fn xs(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| self.x_min + (self.x_max - self.x_min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    /// `sup |g|` on the probe grid.
    pub g_bound: f64,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn check(name: &str, passed: bool, value: f64, detail: String) -> AssumptionCheck {
    AssumptionCheck {
        name: name.to_string(),
        passed,
        value,
        detail,
    }
}

fn worst<F: Fn(f64) -> Result<f64>>(xs: &[f64], f: F) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &x in xs {
        let v = f(x)?;
        if !v.is_finite() {
            return Ok(f64::INFINITY);
        }
        m = m.max(v.abs());
    }
    Ok(m)
}

/// Numeric checks of (A1)–(A5) on a probe grid.
///
/// (A3) and (A4) are partial: only finiteness of moments, smoothness of
/// `q` and boundedness of the available coefficient derivatives are probed.
pub fn validate_assumptions(
    coeff: &CoefficientModel,
    innov: &InnovationModel,
    grid: &GridSpec,
    probe: &ProbeConfig,
) -> Result<ValidationReport> {
    let xs = probe.xs();
    let tol = probe.moment_tolerance;
    let mut checks = Vec::new();

    let mean = worst(&xs, |x| innov.moment_by_quadrature(x, 1))?;
    checks.push(check("A1", mean < tol, mean, format!("max |∫ y q(x,y) dy| = {mean:e}")));
    let mass = worst(&xs, |x| Ok(innov.moment_by_quadrature(x, 0)? - 1.0))?;
    checks.push(check(
        "normalization",
        mass < tol,
        mass,
        format!("max |∫ q(x,y) dy - 1| = {mass:e}"),
    ));

    let (lo, hi) = coeff.variance_bounds();
    let mut a2 = lo > 0.0 && lo <= hi;
    let mut min_s2 = f64::INFINITY;
    for &x in &xs {
        let s2 = coeff.sigma(x).powi(2);
        min_s2 = min_s2.min(s2);
        a2 &= s2.is_finite() && s2 >= lo * (1.0 - 1e-12) && s2 <= hi * (1.0 + 1e-12);
    }
    checks.push(check(
        "A2",
        a2,
        min_s2,
        format!("declared bounds [{lo}, {hi}], smallest probed σ² = {min_s2}"),
    ));
    let var = worst(&xs, |x| Ok(innov.moment_by_quadrature(x, 2)? - coeff.sigma(x).powi(2)))?;
    checks.push(check(
        "A2_variance",
        var < 1e-6,
        var,
        format!("max |∫ y² q(x,y) dy - σ²(x)| = {var:e}"),
    ));

    let mut a3 = true;
    let mut moment_max: f64 = 0.0;
    for &x in &xs {
        for nu in 3..=4 {
            let m = innov.moment_by_quadrature(x, nu)?;
            a3 &= m.is_finite();
            moment_max = moment_max.max(m.abs());
        }
    }
    let curvature = worst(&xs, |x| {
        let s = coeff.sigma(x);
        let e = 1e-3 * s;
        let mut m: f64 = 0.0;
        for j in -40..=40 {
            let y = 0.25 * j as f64 * s;
            let d2 = (innov.density(x, y + e) - 2.0 * innov.density(x, y) + innov.density(x, y - e)) / (e * e);
            m = m.max(d2.abs());
        }
        Ok(m)
    })?;
    a3 &= curvature.is_finite() && curvature < probe.derivative_cap;
    checks.push(check(
        "A3_partial",
        a3,
        moment_max,
        format!("max |μ₃|, |μ₄| = {moment_max}, max |∂²q| = {curvature}"),
    ));

    let derivs = [
        worst(&xs, |x| Ok(coeff.drift_d1(x)))?,
        worst(&xs, |x| Ok(coeff.drift_d2(x)))?,
        worst(&xs, |x| Ok(coeff.sigma_d1(x)))?,
        worst(&xs, |x| Ok(coeff.sigma_d2(x)))?,
    ];
    let dmax = derivs.iter().cloned().fold(0.0, f64::max);
    checks.push(check(
        "A4_partial",
        dmax.is_finite() && dmax < probe.derivative_cap,
        dmax,
        format!("max |m'|, |m''|, |σ'|, |σ''| = {derivs:?}"),
    ));

    let hk = grid.coarse_step();
    let lower = (grid.k as f64).powf(-probe.kappa) / probe.c;
    let a5 = probe.kappa > 0.0 && probe.kappa < 0.2 && lower < hk && hk < probe.c;
    checks.push(check(
        "A5",
        a5,
        hk,
        format!(
            "hk = {hk}, k^-ϰ = {}, need {lower} < hk < {} (ϰ = {}, C = {})",
            (grid.k as f64).powf(-probe.kappa),
            probe.c,
            probe.kappa,
            probe.c
        ),
    ));

    let map = LampertiMap::new(coeff)?;
    let g_bound = map.g_bound(&xs)?;
    checks.push(check(
        "g_bounded",
        g_bound.is_finite(),
        g_bound,
        format!("sup |g| on probe grid = {g_bound}"),
    ));

    Ok(ValidationReport {
        checks,
        g_bound,
        notes: vec!["A3 and A4 are partial: the convolution bound of A3 is a proof device and is not checked".into()],
    })
}
