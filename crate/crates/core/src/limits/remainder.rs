use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{DesignPoint, Estimate, ExperimentReport};
use crate::density::LatticeConfig;
use crate::density::LatticeDensity;
use crate::edgeworth::{pi1, EdgeworthContext};
use crate::error::{Error, Result};
use crate::models::{GridSpec, RegimeTargets};
use crate::quadrature::trapezoid;

/// Ladder of `k` at fixed `kh` for the first-order remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemainderConfig {
    pub kh: f64,
    pub ks: Vec<usize>,
    /// Starting point of the transition.
    pub x: f64,
    pub lattice: LatticeConfig,
}

impl Default for RemainderConfig {
    fn default() -> Self {
        RemainderConfig {
            kh: 0.1,
            ks: vec![4, 8, 16],
            x: 0.0,
            lattice: LatticeConfig::default(),
        }
    }
}

/// `∫|p_h − p|` and `∫|p_h − p − √h π₁|` at `t = kh` for one `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderPoint {
    pub k: usize,
    pub uncorrected: f64,
    pub corrected: f64,
    pub lattice_mass: f64,
}

/// Both integrals on the chain lattice for the grid of `ctx` (only `h` and `k` are used).
pub fn remainder_point(ctx: &EdgeworthContext, x: f64, lattice: &LatticeConfig) -> Result<RemainderPoint> {
    let grid = ctx.grid();
    let t = grid.coarse_step();
    let lat = LatticeDensity::new(ctx.coefficients(), ctx.innovations(), grid.h, grid.k, x, lattice)?;
    let sh = grid.h.sqrt();
    let rows = lat
        .nodes()
        .into_par_iter()
        .zip(lat.values().par_iter())
        .map(|(z, &ph)| {
            let p = ctx.density().value(t, x, z)?;
            let c = pi1(ctx, t, x, z)?.value;
            Ok(((ph - p).abs(), (ph - p - sh * c).abs()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (plain, corr): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok(RemainderPoint {
        k: grid.k,
        uncorrected: trapezoid(&plain, lat.spacing()),
        corrected: trapezoid(&corr, lat.spacing()),
        lattice_mass: lat.mass(),
    })
}

/// `k · ∫|p_h − p − √h π₁|(kh, x, ·)` over the ladder, with the uncorrected
/// integral as ablation.
pub fn theorem4_remainder_check(ctx: &EdgeworthContext, cfg: &RemainderConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.ks.is_empty() || !(cfg.kh > 0.0) {
        return Err(Error::InvalidParameter(
            "remainder ladder needs kh > 0 and at least one k".into(),
        ));
    }
    let first = GridSpec::new(cfg.kh / cfg.ks[0] as f64, cfg.ks[0], 1)?;
    let mut out = ExperimentReport::new(
        "remainder",
        DesignPoint::of(&ctx.with_grid(first)?, 0, 0),
        first.regime(&RegimeTargets::default()),
    );
    let mut scaled = Vec::new();
    let mut always_smaller = true;
    for &k in &cfg.ks {
        let grid = GridSpec::new(cfg.kh / k as f64, k, 1)?;
        let r = remainder_point(&ctx.with_grid(grid)?, cfg.x, &cfg.lattice)?;
        out.insert(format!("k{k}_integral_corrected"), Estimate::exact(r.corrected, 1));
        out.insert(format!("k{k}_integral_uncorrected"), Estimate::exact(r.uncorrected, 1));
        out.insert(
            format!("k{k}_k_times_corrected"),
            Estimate::exact(k as f64 * r.corrected, 1),
        );
        out.insert(format!("k{k}_lattice_mass"), Estimate::exact(r.lattice_mass, 1));
        scaled.push(k as f64 * r.corrected);
        always_smaller &= r.corrected < r.uncorrected;
    }
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    out.insert(
        "k_times_corrected_spread",
        Estimate::exact(hi / lo, cfg.ks.len()).with_target(2.0),
    );
    out.insert(
        "corrected_below_uncorrected",
        Estimate::exact(f64::from(u8::from(always_smaller)), cfg.ks.len()),
    );
    out.wall_clock = start.elapsed();
    Ok(out)
}
