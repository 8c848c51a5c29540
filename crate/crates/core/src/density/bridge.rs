use serde::{Deserialize, Serialize};

use super::{DensityEstimate, Method};
use crate::error::{Error, Result};
use crate::models::{CoefficientModel, LampertiMap};
use crate::paths::fill_bridge;
use crate::rng::RandomStream;
use crate::special::LN_SQRT_2PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeConfig {
    pub samples: usize,
    pub mesh: usize,
    pub seed: u64,
    /// Estimates whose relative stderr exceeds this are flagged.
    pub stderr_cap: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            samples: 256,
            mesh: 64,
            seed: 0x0b1d_9e5e_ed00,
            stderr_cap: 0.05,
        }
    }
}

/// Transition density from the bridge representation
/// `p = p̂ · E exp(t ∫₀¹ g(z_δ + √t B_δ) dδ)`.
///
/// One fixed ensemble of bridges is drawn at construction and reused for
/// every `(t, x, y)`, so the estimate is a smooth function of its
/// arguments and can be differentiated numerically.
#[derive(Debug, Clone)]
pub struct DcfzDensity {
    map: LampertiMap,
    cfg: BridgeConfig,
    bridges: Vec<f64>,
    weights: Vec<f64>,
    nodes: Vec<f64>,
}

impl DcfzDensity {
    pub fn new(coeff: &CoefficientModel, cfg: BridgeConfig) -> Result<Self> {
        if cfg.samples < 2 || cfg.mesh < 2 {
            return Err(Error::InvalidParameter(format!(
                "bridge ensemble needs >= 2 samples and mesh >= 2, got {} and {}",
                cfg.samples, cfg.mesh
            )));
        }
        let map = LampertiMap::new(coeff)?;
        let width = cfg.mesh + 1;
        let mut bridges = vec![0.0; cfg.samples * width];
        if map.constant_g().is_none() {
            for (i, row) in bridges.chunks_mut(width).enumerate() {
                fill_bridge(&mut RandomStream::new(cfg.seed, i as u64).rng(), row)?;
            }
        }
        let dd = 1.0 / cfg.mesh as f64;
        let mut weights = vec![dd; width];
        weights[0] = 0.5 * dd;
        weights[cfg.mesh] = 0.5 * dd;
        let nodes = (0..width).map(|j| j as f64 * dd).collect();
        Ok(DcfzDensity {
            map,
            cfg,
            bridges,
            weights,
            nodes,
        })
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.cfg
    }

    pub fn coefficients(&self) -> &CoefficientModel {
        self.map.coefficients()
    }

    pub fn map(&self) -> &LampertiMap {
        &self.map
    }

    pub fn ln_hat(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        let ds = self.map.s(y)? - self.map.s(x)?;
        let dh = self.map.h(y)? - self.map.h(x)?;
        let sy = self.coefficients().sigma(y);
        Ok(-LN_SQRT_2PI - 0.5 * t.ln() - sy.ln() - 0.5 * ds * ds / t + dh)
    }

    /// Bridge expectation and its standard error.
    pub fn bridge_factor(&self, t: f64, x: f64, y: f64) -> Result<(f64, f64)> {
        if let Some(g) = self.map.constant_g() {
            return Ok(((t * g).exp(), 0.0));
        }
        let (sx, sy) = (self.map.s(x)?, self.map.s(y)?);
        let st = t.sqrt();
        let width = self.cfg.mesh + 1;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for row in self.bridges.chunks(width) {
            let mut integral = 0.0;
            for ((node, w), b) in self.nodes.iter().zip(&self.weights).zip(row) {
                integral += w * self.map.g(sx + node * (sy - sx) + st * b);
            }
            let v = (t * integral).exp();
            sum += v;
            sum2 += v * v;
        }
        let n = self.cfg.samples as f64;
        let mean = sum / n;
        let var = ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0);
        Ok((mean, (var / n).sqrt()))
    }

    pub fn estimate(&self, t: f64, x: f64, y: f64) -> Result<DensityEstimate> {
        check_time(t)?;
        let hat = self.ln_hat(t, x, y)?.exp();
        let (mean, se) = self.bridge_factor(t, x, y)?;
        Ok(DensityEstimate {
            value: hat * mean,
            stderr: hat * se,
            method: Method::BridgeMc,
            flagged: se > self.cfg.stderr_cap * mean,
        })
    }

    pub fn ln_value(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.ln_hat(t, x, y)? + self.bridge_factor(t, x, y)?.0.ln())
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time must be > 0, got {t}")))
    }
}

/// `p(t, x, y)` from the bridge representation with a fresh ensemble.
pub fn dcfz_p(coeff: &CoefficientModel, t: f64, x: f64, y: f64, cfg: &BridgeConfig) -> Result<DensityEstimate> {
    DcfzDensity::new(coeff, *cfg)?.estimate(t, x, y)
}
