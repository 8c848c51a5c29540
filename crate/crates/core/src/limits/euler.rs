use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::experiments::{par_paths, McConfig};
use super::report::{DesignPoint, Estimate, ExperimentReport};
use super::stats::{energy_distance, ks_two_sample};
use crate::error::{Error, Result};
use crate::models::{CoefficientModel, Regime};
use crate::rng::{standard_normal, RandomStream};

/// Euler step ladder `Δ/k` against the exact coarse law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EulerBenchConfig {
    /// Coarse observation spacing `Δ`.
    pub delta: f64,
    pub n: usize,
    pub ks: Vec<usize>,
    pub x0: f64,
}

impl Default for EulerBenchConfig {
    fn default() -> Self {
        EulerBenchConfig {
            delta: 0.25,
            n: 8,
            ks: vec![4, 16, 64],
            x0: 0.0,
        }
    }
}

/// Finest resolution shared by every rung of the ladder.
const MAX_FINE: usize = 4096;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `(drift at 0, rate, sigma)` with `m(x) = drift − rate·x`.
fn linear_model(coeff: &CoefficientModel) -> Result<(f64, f64, f64)> {
    match *coeff {
        CoefficientModel::Constant { drift, sigma } => Ok((drift, 0.0, sigma)),
        CoefficientModel::OrnsteinUhlenbeck { rate, sigma } => Ok((0.0, rate, sigma)),
        _ => Err(Error::RequiresExactLaw("the Euler consistency bench")),
    }
}

/// `∫ e^{−a s} ds` over `[lo, hi]`, stable as `a → 0`.
fn exp_integral(a: f64, lo: f64, hi: f64) -> f64 {
    if a == 0.0 {
        hi - lo
    } else {
        (-a * lo).exp() * -(-a * (hi - lo)).exp_m1() / a
    }
}

/// Per-cell weights of the exact linear SDE over one coarse step, given the
/// Brownian increments on `fine` equal cells: mean weights `c_j / δ` and the
/// residual conditional variance.
struct ExactWeights {
    decay: f64,
    drift_gain: f64,
    mean_weights: Vec<f64>,
    residual_sd: f64,
}

impl ExactWeights {
    fn new(drift: f64, rate: f64, sigma: f64, delta: f64, fine: usize) -> Self {
        let d = delta / fine as f64;
        let mut mean_weights = Vec::with_capacity(fine);
        let mut residual = 0.0;
        for j in 0..fine {
            // Cell j covers Δ − u ∈ [Δ − (j+1)δ, Δ − jδ].
            let (lo, hi) = (delta - (j + 1) as f64 * d, delta - j as f64 * d);
            let c = exp_integral(rate, lo, hi);
            let v = exp_integral(2.0 * rate, lo, hi);
            mean_weights.push(sigma * c / d);
            residual += v - c * c / d;
        }
        ExactWeights {
            decay: (-rate * delta).exp(),
            drift_gain: drift * exp_integral(rate, 0.0, delta),
            mean_weights,
            residual_sd: sigma * residual.max(0.0).sqrt(),
        }
    }
}

/// Coarse increments of one exact path and of one Euler path per `k`,
/// all driven by the same Brownian motion.
fn coupled_paths(
    (drift, rate, sigma): (f64, f64, f64),
    cfg: &EulerBenchConfig,
    fine: usize,
    exact: &ExactWeights,
    stream: &RandomStream,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = stream.rng();
    let d = cfg.delta / fine as f64;
    let sd = d.sqrt();
    let mut dw = vec![0.0; fine];
    let mut y_exact = cfg.x0;
    let mut y_euler = vec![cfg.x0; cfg.ks.len()];
    let mut inc_exact = Vec::with_capacity(cfg.n);
    let mut inc_euler = vec![Vec::with_capacity(cfg.n); cfg.ks.len()];
    for _ in 0..cfg.n {
        for w in dw.iter_mut() {
            *w = sd * standard_normal(&mut rng);
        }
        let noise: f64 = exact.mean_weights.iter().zip(&dw).map(|(c, w)| c * w).sum::<f64>()
            + exact.residual_sd * standard_normal(&mut rng);
        let next = y_exact * exact.decay + exact.drift_gain + noise;
        inc_exact.push(next - y_exact);
        y_exact = next;
        for (r, &k) in cfg.ks.iter().enumerate() {
            let per = fine / k;
            let step = cfg.delta / k as f64;
            let start = y_euler[r];
            let mut y = start;
            for cell in dw.chunks(per) {
                y += (drift - rate * y) * step + sigma * cell.iter().sum::<f64>();
            }
            inc_euler[r].push(y - start);
            y_euler[r] = y;
        }
    }
    (inc_exact, inc_euler)
}

/// Euler paths with step `Δ/k`, observed at `Δ, 2Δ, ..., nΔ`, against exact
/// samples of the same coarse law: energy distance on the `n`-dimensional
/// increment vectors and the largest per-increment KS distance, per `k`.
pub fn euler_consistency_experiment(
    coeff: &CoefficientModel,
    cfg: &EulerBenchConfig,
    mc: &McConfig,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let model = linear_model(coeff)?;
    if cfg.ks.is_empty() || cfg.ks.contains(&0) || cfg.n == 0 || !(cfg.delta > 0.0) {
        return Err(Error::InvalidParameter(
            "Euler bench needs delta > 0, n >= 1 and k >= 1".into(),
        ));
    }
    let fine = cfg.ks.iter().fold(1usize, |l, &k| l / gcd(l, k) * k);
    if fine > MAX_FINE {
        return Err(Error::InvalidParameter(format!(
            "the k ladder needs {fine} fine cells per step, more than {MAX_FINE}"
        )));
    }
    let exact = ExactWeights::new(model.0, model.1, model.2, cfg.delta, fine);
    let samples = par_paths(mc, |i| {
        Ok(coupled_paths(model, cfg, fine, &exact, &RandomStream::new(mc.seed, i)))
    })?;
    let exact_vecs: Vec<Vec<f64>> = samples.iter().map(|s| s.0.clone()).collect();

    let kmax = *cfg.ks.iter().max().unwrap_or(&1);
    let mut out = ExperimentReport::new(
        "euler_bench",
        DesignPoint {
            n: cfg.n,
            k: kmax,
            h: cfg.delta / kmax as f64,
            model: coeff.id(),
            innovation: "gaussian".into(),
            mu3: 0.0,
            seed: mc.seed,
            n_paths: mc.n_paths,
        },
        Regime::Neither,
    );
    let mut energies = Vec::with_capacity(cfg.ks.len());
    for (r, &k) in cfg.ks.iter().enumerate() {
        let euler: Vec<Vec<f64>> = samples.iter().map(|s| s.1[r].clone()).collect();
        let (e, se) = energy_distance(&euler, &exact_vecs);
        out.insert(format!("k{k}_energy_distance"), Estimate::new(e, se, mc.n_paths));
        let ks_max = (0..cfg.n)
            .map(|i| {
                let a: Vec<f64> = euler.iter().map(|v| v[i]).collect();
                let b: Vec<f64> = exact_vecs.iter().map(|v| v[i]).collect();
                ks_two_sample(&a, &b).0
            })
            .fold(0.0, f64::max);
        out.insert(format!("k{k}_max_increment_ks"), Estimate::exact(ks_max, mc.n_paths));
        energies.push(e);
    }
    let decreasing = energies.windows(2).all(|w| w[1] < w[0]);
    out.insert(
        "energy_strictly_decreasing",
        Estimate::exact(f64::from(u8::from(decreasing)), cfg.ks.len()),
    );
    out.notes.push(format!(
        "exact and Euler paths share Brownian increments on {fine} cells per coarse step"
    ));
    out.wall_clock = start.elapsed();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc(n_paths: usize) -> McConfig {
        McConfig {
            n_paths,
            ..McConfig::default()
        }
    }

    #[test]
    fn exact_weights_reproduce_ou_moments() {
        // Total variance Σ c_j²/δ + residual equals (1 − e^{−2rΔ})σ²/(2r).
        let (rate, sigma, delta) = (1.3, 0.7, 0.25);
        let w = ExactWeights::new(0.0, rate, sigma, delta, 16);
        let d = delta / 16.0;
        let total: f64 = w.mean_weights.iter().map(|c| c * c * d).sum::<f64>() + w.residual_sd.powi(2);
        let expected = sigma * sigma * -(-2.0 * rate * delta).exp_m1() / (2.0 * rate);
        assert!((total - expected).abs() < 1e-14);
        assert!((w.decay - (-rate * delta).exp()).abs() < 1e-15);
    }

    #[test]
    fn constant_model_euler_is_exact() {
        let coeff = CoefficientModel::unit();
        let cfg = EulerBenchConfig {
            n: 4,
            ks: vec![1, 4],
            ..EulerBenchConfig::default()
        };
        let r = euler_consistency_experiment(&coeff, &cfg, &mc(300)).unwrap();
        for k in [1, 4] {
            assert!(r.value(&format!("k{k}_energy_distance")).abs() < 1e-12);
            // Rounding can reorder near-equal values by one rank.
            assert!(r.value(&format!("k{k}_max_increment_ks")) <= 1.0 / 300.0 + 1e-12);
        }
    }

    #[test]
    fn rejects_models_without_exact_law() {
        let coeff = CoefficientModel::smooth(0.5, 0.2).unwrap();
        assert!(matches!(
            euler_consistency_experiment(&coeff, &EulerBenchConfig::default(), &mc(10)),
            Err(Error::RequiresExactLaw(_))
        ));
    }

    #[test]
    fn satisfying_schedule_beats_violating_one() {
        // n = 16 with k = ⌈n^0.6⌉ = 6 against k = n = 16.
        let coeff = CoefficientModel::ornstein_uhlenbeck(1.0, 1.0).unwrap();
        let cfg = EulerBenchConfig {
            n: 16,
            ks: vec![6, 16],
            ..EulerBenchConfig::default()
        };
        let r = euler_consistency_experiment(&coeff, &cfg, &mc(1500)).unwrap();
        assert!(r.value("k16_energy_distance") < r.value("k6_energy_distance"));
    }
}
