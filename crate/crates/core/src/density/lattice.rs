use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CoefficientModel, GridSpec, InnovationModel};

/// `h^{-1/2} q(x, (y − x − m(x) h) / √h)`: the one-step chain law.
pub fn chain_step_kernel(coeff: &CoefficientModel, innov: &InnovationModel, h: f64, x: f64, y: f64) -> f64 {
    let sh = h.sqrt();
    innov.density(x, (y - x - coeff.drift(x) * h) / sh) / sh
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    /// Half-width of the lattice in sds of the k-step law.
    pub sds: f64,
    /// Spacing is at most `√h / spacing_divisor`.
    pub spacing_divisor: f64,
    /// Spacing is at most `range / max_cells`.
    pub max_cells: usize,
    pub leak_limit: f64,
    /// Fixed spacing, overriding the two rules above.
    pub spacing: Option<f64>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            sds: 12.0,
            spacing_divisor: 8.0,
            max_cells: 4096,
            leak_limit: 1e-6,
            spacing: None,
        }
    }
}

/// `p_h(jh, x, ·)` on a uniform lattice, built by repeated trapezoid
/// integration of the one-step kernel.
#[derive(Debug, Clone)]
pub struct LatticeDensity {
    coeff: CoefficientModel,
    innov: InnovationModel,
    h: f64,
    x: f64,
    steps: usize,
    start: f64,
    spacing: f64,
    values: Vec<f64>,
    previous: Option<Vec<f64>>,
    leak_limit: f64,
}

impl LatticeDensity {
    /// The `k`-step density from `x`, sized for a horizon of `k` steps.
    pub fn new(
        coeff: &CoefficientModel,
        innov: &InnovationModel,
        h: f64,
        k: usize,
        x: f64,
        cfg: &LatticeConfig,
    ) -> Result<Self> {
        Self::sized_for(coeff, innov, h, k, k, x, cfg)
    }

    /// `steps`-step density on a lattice wide enough for `horizon` steps.
    pub fn sized_for(
        coeff: &CoefficientModel,
        innov: &InnovationModel,
        h: f64,
        steps: usize,
        horizon: usize,
        x: f64,
        cfg: &LatticeConfig,
    ) -> Result<Self> {
        if !(h > 0.0) || steps == 0 || horizon < steps {
            return Err(Error::InvalidParameter(format!(
                "lattice needs h > 0 and 1 <= steps <= horizon, got h = {h}, steps = {steps}, horizon = {horizon}"
            )));
        }
        let s_up = coeff.variance_bounds().1.sqrt() * innov.law().scale();
        let tau = horizon as f64 * h;
        let center = x + tau * coeff.drift(x);
        let half = cfg.sds * s_up * tau.sqrt();
        let spacing = cfg
            .spacing
            .unwrap_or_else(|| (h.sqrt() / cfg.spacing_divisor).min(2.0 * half / cfg.max_cells as f64));
        // Align the lattice so that x is a node.
        let lo = x - ((x - (center - half)) / spacing).ceil() * spacing;
        let cells = ((center + half - lo) / spacing).ceil() as usize;
        let start = lo;
        let nodes = cells + 1;
        let first: Vec<f64> = (0..nodes)
            .map(|i| chain_step_kernel(coeff, innov, h, x, start + i as f64 * spacing))
            .collect();
        let mut lattice = LatticeDensity {
            coeff: coeff.clone(),
            innov: innov.clone(),
            h,
            x,
            steps: 1,
            start,
            spacing,
            values: first,
            previous: None,
            leak_limit: cfg.leak_limit,
        };
        lattice.advance(steps - 1)?;
        lattice.check_mass()?;
        Ok(lattice)
    }

    /// Composes `more` further steps of the chain.
    pub fn advance(&mut self, more: usize) -> Result<()> {
        for _ in 0..more {
            let next = self.step_once();
            self.previous = Some(std::mem::replace(&mut self.values, next));
            self.steps += 1;
        }
        Ok(())
    }

    fn step_once(&self) -> Vec<f64> {
        let n = self.values.len();
        let d = self.spacing;
        let sh = self.h.sqrt();
        let reach = self.innov.law().extent() * sh;
        let mut out = vec![0.0; n];
        if let Some((m, s)) = self.coeff.constant_coefficients() {
            // Translation invariant: the kernel depends on the index offset only.
            let shift = m * self.h;
            let lo = ((shift - reach * s) / d).floor() as i64;
            let hi = ((shift + reach * s) / d).ceil() as i64;
            let kernel: Vec<f64> = (lo..=hi)
                .map(|j| chain_step_kernel(&self.coeff, &self.innov, self.h, 0.0, j as f64 * d))
                .collect();
            for (l, &v) in self.values.iter().enumerate() {
                let w = if l == 0 || l == n - 1 { 0.5 } else { 1.0 } * d * v;
                if w == 0.0 {
                    continue;
                }
                for (o, kv) in (lo..=hi).zip(&kernel) {
                    let i = l as i64 + o;
                    if i >= 0 && (i as usize) < n {
                        out[i as usize] += w * kv;
                    }
                }
            }
        } else {
            for (l, &v) in self.values.iter().enumerate() {
                let w = if l == 0 || l == n - 1 { 0.5 } else { 1.0 } * d * v;
                if w == 0.0 {
                    continue;
                }
                let z = self.node(l);
                let c = z + self.coeff.drift(z) * self.h;
                let r = reach * self.coeff.sigma(z);
                let i0 = (((c - r - self.start) / d).floor().max(0.0)) as usize;
                let i1 = (((c + r - self.start) / d).ceil().max(0.0) as usize).min(n - 1);
                let i1 = i1.max(i0).min(n - 1);
                for (i, o) in out.iter_mut().enumerate().take(i1 + 1).skip(i0) {
                    *o += w * chain_step_kernel(&self.coeff, &self.innov, self.h, z, self.node(i));
                }
            }
        }
        out
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.node(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn origin(&self) -> f64 {
        self.x
    }

    /// Trapezoid mass of the lattice density.
    pub fn mass(&self) -> f64 {
        crate::quadrature::trapezoid(&self.values, self.spacing)
    }

    pub fn check_mass(&self) -> Result<()> {
        let leaked = (1.0 - self.mass()).abs();
        if leaked > self.leak_limit {
            return Err(Error::MassLeak {
                leaked,
                limit: self.leak_limit,
            });
        }
        Ok(())
    }

    /// `p_h(steps · h, x, y)` at any `y`; the last step is integrated exactly in `y`.
    pub fn eval(&self, y: f64) -> f64 {
        match &self.previous {
            None => chain_step_kernel(&self.coeff, &self.innov, self.h, self.x, y),
            Some(prev) => {
                let n = prev.len();
                prev.iter()
                    .enumerate()
                    .map(|(l, &v)| {
                        let w = if l == 0 || l == n - 1 { 0.5 } else { 1.0 };
                        w * v * chain_step_kernel(&self.coeff, &self.innov, self.h, self.node(l), y)
                    })
                    .sum::<f64>()
                    * self.spacing
            }
        }
    }
}

/// `p_h(kh, x, y)` by `k`-fold numerical composition of the one-step kernel.
pub fn chain_transition_ph(
    coeff: &CoefficientModel,
    innov: &InnovationModel,
    grid: &GridSpec,
    x: f64,
    y: f64,
    cfg: &LatticeConfig,
) -> Result<f64> {
    Ok(LatticeDensity::new(coeff, innov, grid.h, grid.k, x, cfg)?.eval(y))
}
