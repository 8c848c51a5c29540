use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::deltas::{delta_sequence, DeltaSequence};
use super::report::{DesignPoint, Estimate, ExperimentReport};
use super::stats::{
    correlation, energy_distance, ks_one_sample, mean_stderr, quantile_stderr, regression_slope, variance_stderr,
};
use crate::edgeworth::EdgeworthContext;
use crate::error::{Error, Result};
use crate::models::RegimeTargets;
use crate::paths::{sample_coarse_diffusion, simulate_chain, subsample};
use crate::rng::RandomStream;
use crate::special::normal_cdf;

/// Monte Carlo settings. Path `i` always draws from substream `i` of `seed`,
/// so the same seed pairs paths across design points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Minimum number of paths a worker takes at once.
    pub chunk_size: usize,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Starting point of every path.
    pub x0: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 2000,
            seed: 0x5eed_2024,
            chunk_size: 64,
            workers: 0,
            x0: 0.0,
        }
    }
}

/// Maps `f` over path indices in parallel; results come back in index order.
pub fn par_paths<T, F>(mc: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    in_pool(mc.workers, || {
        (0..mc.n_paths)
            .into_par_iter()
            .with_min_len(mc.chunk_size.max(1))
            .map(|i| f(i as u64))
            .collect::<Result<Vec<T>>>()
    })?
}

/// Runs `f` on a pool with `workers` threads (the global pool for 0).
pub fn in_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// `Δ` sequences along `mc.n_paths` exact coarse diffusion paths.
pub fn simulate_deltas(ctx: &EdgeworthContext, mc: &McConfig, second_order: bool) -> Result<Vec<DeltaSequence>> {
    par_paths(mc, |i| {
        let path = sample_coarse_diffusion(ctx.coefficients(), mc.x0, ctx.grid(), &RandomStream::new(mc.seed, i))?;
        delta_sequence(ctx, &path, i, second_order)
    })
}

fn report(name: &str, ctx: &EdgeworthContext, mc: &McConfig) -> ExperimentReport {
    ExperimentReport::new(
        name,
        DesignPoint::of(ctx, mc.seed, mc.n_paths),
        ctx.grid().regime(&RegimeTargets::default()),
    )
}

/// `‖Q_h¹ − Q_h‖₁ = E|1 − ∏(1 + Δᵢ)|` by Monte Carlo over `Q_h` paths.
pub fn estimate_q1_q_distance(ctx: &EdgeworthContext, mc: &McConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let seqs = simulate_deltas(ctx, mc, false)?;
    let mut out = report("q1_q_distance", ctx, mc);
    let mut devs = Vec::with_capacity(seqs.len());
    let (mut nonfinite, mut nonpositive) = (0usize, 0usize);
    for s in &seqs {
        let p = s.log_product();
        if p.nonpositive > 0 {
            nonpositive += 1;
        }
        let d = (1.0 - p.value()).abs();
        if p.is_finite() && d.is_finite() {
            devs.push(d);
        } else {
            nonfinite += 1;
        }
    }
    let (m, se) = mean_stderr(&devs);
    out.insert("l1_q1_q", Estimate::new(m, se, devs.len()));
    out.insert("nonfinite_paths", Estimate::exact(nonfinite as f64, seqs.len()));
    out.insert(
        "nonpositive_factor_paths",
        Estimate::exact(nonpositive as f64, seqs.len()),
    );
    if nonfinite > 0 {
        out.notes.push(format!(
            "{nonfinite} paths with a non-finite product are excluded from l1_q1_q"
        ));
    }
    out.wall_clock = start.elapsed();
    Ok(out)
}

/// Quantiles of `supᵢ|Δᵢ|` and `|ΣΔᵢ|` next to the scalings `k^{−1/2}(log n)^{3/2}`
/// and `√(n/k)`, plus the orthogonality and martingale diagnostics.
pub fn sup_scaling_diagnostics(ctx: &EdgeworthContext, mc: &McConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let seqs = simulate_deltas(ctx, mc, false)?;
    let mut out = report("sup_scaling", ctx, mc);
    let n_paths = seqs.len();
    let grid = ctx.grid();
    let (n, k) = (grid.n as f64, grid.k as f64);
    let sup_scale = k.powf(-0.5) * n.ln().max(0.0).powf(1.5);
    let sum_scale = (n / k).sqrt();
    out.insert("scale_sup", Estimate::exact(sup_scale, n_paths));
    out.insert("scale_sum", Estimate::exact(sum_scale, n_paths));

    let sups: Vec<f64> = seqs.iter().map(|s| s.sup_abs()).collect();
    let sums: Vec<f64> = seqs.iter().map(|s| s.sum()).collect();
    let abs_sums: Vec<f64> = sums.iter().map(|s| s.abs()).collect();
    for (label, p) in [("q50", 0.5), ("q90", 0.9), ("q99", 0.99)] {
        let (q, se) = quantile_stderr(&sups, p);
        out.insert(format!("sup_abs_delta_{label}"), Estimate::new(q, se, n_paths));
        if sup_scale > 0.0 {
            out.insert(
                format!("sup_abs_delta_{label}_over_scale"),
                Estimate::new(q / sup_scale, se / sup_scale, n_paths),
            );
        }
        let (q, se) = quantile_stderr(&abs_sums, p);
        out.insert(format!("abs_sum_delta_{label}"), Estimate::new(q, se, n_paths));
        out.insert(
            format!("abs_sum_delta_{label}_over_scale"),
            Estimate::new(q / sum_scale, se / sum_scale, n_paths),
        );
    }

    // Columns Δᵢ across paths.
    let cols: Vec<Vec<f64>> = (0..grid.n)
        .map(|i| seqs.iter().map(|s| s.deltas[i]).collect())
        .collect();
    let mut max_corr = 0.0f64;
    for i in 0..grid.n {
        for j in (i + 1)..grid.n {
            max_corr = max_corr.max(correlation(&cols[i], &cols[j]).abs());
        }
    }
    let bound = 4.0 / (n_paths as f64).sqrt();
    out.insert("max_abs_corr_ij", Estimate::exact(max_corr, n_paths).with_target(bound));
    if grid.n >= 2 {
        let x: Vec<f64> = seqs
            .iter()
            .flat_map(|s| s.deltas[..grid.n - 1].iter().copied())
            .collect();
        let y: Vec<f64> = seqs.iter().flat_map(|s| s.deltas[1..].iter().copied()).collect();
        let (slope, se) = regression_slope(&x, &y);
        out.insert("lag1_slope", Estimate::new(slope, se, x.len()).with_target(0.0));
    }
    let (v, se) = variance_stderr(&sums);
    out.insert("var_sum_delta", Estimate::new(v, se, n_paths));
    let sum_var: f64 = cols.iter().map(|c| variance_stderr(c).0).sum();
    out.insert("sum_var_delta", Estimate::exact(sum_var, n_paths));
    let pooled: Vec<f64> = cols.concat();
    for p in [2, 4] {
        let scaled: Vec<f64> = pooled
            .iter()
            .map(|d| d.abs().powi(p) * k.powf(p as f64 / 2.0))
            .collect();
        let (m, se) = mean_stderr(&scaled);
        out.insert(format!("moment{p}_times_k_pow"), Estimate::new(m, se, scaled.len()));
    }
    out.wall_clock = start.elapsed();
    Ok(out)
}

/// Variance of `ΣΔᵢ` in the `n/k → c` regime, against `22cμ₃²` and the
/// Hermite-consistent value `(n/k)μ₃²/6`.
pub fn clt_experiment(ctx: &EdgeworthContext, mc: &McConfig, c: f64) -> Result<ExperimentReport> {
    let start = Instant::now();
    if !ctx.coefficients().is_unit() {
        return Err(Error::RequiresUnitModel("the CLT experiment"));
    }
    let seqs = simulate_deltas(ctx, mc, false)?;
    let mut out = report("clt", ctx, mc);
    out.regime = ctx.grid().regime(&RegimeTargets {
        c,
        ..RegimeTargets::default()
    });
    let n_paths = seqs.len();
    let ratio = ctx.grid().ratio();
    let mu3 = ctx.innovations().standardized_mu3();
    let target = 22.0 * ratio * mu3 * mu3;
    let hermite = ratio * mu3 * mu3 / 6.0;
    out.insert("c_requested", Estimate::exact(c, n_paths));
    out.insert("c_realized", Estimate::exact(ratio, n_paths));
    out.insert("target_variance_22c_mu3_sq", Estimate::exact(target, n_paths));
    out.insert("hermite_reference_variance", Estimate::exact(hermite, n_paths));

    let sums: Vec<f64> = seqs.iter().map(|s| s.sum()).collect();
    let (m, se) = mean_stderr(&sums);
    out.insert("mean_sum_delta", Estimate::new(m, se, n_paths));
    let (v, se) = variance_stderr(&sums);
    out.insert("var_sum_delta", Estimate::new(v, se, n_paths).with_target(target));
    out.insert(
        "var_sum_delta_vs_hermite",
        Estimate::new(v, se, n_paths).with_target(hermite),
    );
    let quad: Vec<f64> = seqs.iter().map(|s| s.sum_squares()).collect();
    let (qm, qse) = mean_stderr(&quad);
    out.insert(
        "mean_quadratic_characteristic",
        Estimate::new(qm, qse, n_paths).with_target(target),
    );
    for (label, var) in [("22c", target), ("hermite", hermite)] {
        if var > 0.0 {
            let sd = var.sqrt();
            let (d, p) = ks_one_sample(&sums, |x| normal_cdf((x - m) / sd));
            out.insert(format!("ks_normal_{label}_statistic"), Estimate::exact(d, n_paths));
            out.insert(format!("ks_normal_{label}_p_value"), Estimate::exact(p, n_paths));
        }
    }
    if (ratio - c).abs() > 1e-12 {
        out.notes.push(format!(
            "n/k = {ratio} realizes the requested c = {c} after integer rounding"
        ));
    }
    if target == 0.0 {
        out.notes.push("mu3 = 0: the sum of deltas is degenerate at 0".into());
    }
    out.wall_clock = start.elapsed();
    Ok(out)
}

/// Energy distance between coarse increment vectors of the subsampled chain
/// and of the diffusion. A proxy for the direction of `‖P_h − Q_h‖₁`, not an
/// estimate of it.
pub fn chain_diffusion_energy(ctx: &EdgeworthContext, mc: &McConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = *ctx.grid();
    let pairs = par_paths(mc, |i| {
        let stream = RandomStream::new(mc.seed, i);
        let chain = simulate_chain(
            ctx.coefficients(),
            ctx.innovations(),
            mc.x0,
            &grid,
            &stream.substream(0),
        );
        let chain = subsample(&chain, grid.k)?;
        let diff = sample_coarse_diffusion(ctx.coefficients(), mc.x0, &grid, &stream.substream(1))?;
        Ok((chain.increments(), diff.increments()))
    })?;
    let (chain, diff): (Vec<Vec<f64>>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
    let (e, se) = energy_distance(&chain, &diff);
    let mut out = report("chain_diffusion_energy", ctx, mc);
    out.insert("energy_distance_proxy", Estimate::new(e, se, mc.n_paths));
    out.wall_clock = start.elapsed();
    Ok(out)
}
