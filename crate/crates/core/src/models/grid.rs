use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fine step `h`, subsampling factor `k` and number of observations `n`.
///
/// The chain runs on `h, 2h, ..., nkh` and is observed on `kh, 2kh, ..., nkh`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
    pub k: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `n/k` small: the chain and the diffusion are close in L1.
    Theorem1,
    /// `n/k ≈ c > 0`: skewness survives in first order.
    Theorem3,
    Neither,
}

/// Declared targets the regime classifier compares `n/k` against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeTargets {
    /// `n/k` at or below this counts as the vanishing-ratio regime.
    pub small_ratio: f64,
    /// The constant `c` of the `n/k → c` regime.
    pub c: f64,
    /// Relative tolerance around `c`.
    pub c_tolerance: f64,
}

impl Default for RegimeTargets {
    fn default() -> Self {
        RegimeTargets {
            small_ratio: 0.1,
            c: 1.0,
            c_tolerance: 0.1,
        }
    }
}

impl GridSpec {
    pub fn new(h: f64, k: usize, n: usize) -> Result<Self> {
        let grid = GridSpec { h, k, n };
        grid.check()?;
        Ok(grid)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid.h must be > 0, got {}", self.h)));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("grid.k must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("grid.n must be >= 1".into()));
        }
        Ok(())
    }

    /// Coarse observation spacing `kh`.
    pub fn coarse_step(&self) -> f64 {
        self.k as f64 * self.h
    }

    /// Horizon `T = nkh`.
    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.coarse_step()
    }

    pub fn fine_steps(&self) -> usize {
        self.n * self.k
    }

    pub fn ratio(&self) -> f64 {
        self.n as f64 / self.k as f64
    }

    pub fn regime(&self, targets: &RegimeTargets) -> Regime {
        let r = self.ratio();
        if r <= targets.small_ratio {
            Regime::Theorem1
        } else if (r - targets.c).abs() <= targets.c_tolerance * targets.c.abs() {
            Regime::Theorem3
        } else {
            Regime::Neither
        }
    }
}
