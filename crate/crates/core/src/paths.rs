//! Chain, diffusion and Brownian-bridge path simulation.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CoefficientModel, GridSpec, InnovationModel};
use crate::rng::{standard_normal, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Chain,
    Euler,
    ExactDiffusion,
}

impl Origin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Origin::Chain => "chain",
            Origin::Euler => "euler",
            Origin::ExactDiffusion => "exact-diffusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub origin: Origin,
}

impl PathSample {
    fn on_grid(values: Vec<f64>, step: f64, origin: Origin) -> Self {
        let times = (0..values.len()).map(|i| i as f64 * step).collect();
        PathSample { times, values, origin }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `nk` steps of `X ← X + m(X) h + √h ξ` with `ξ ~ q(X, ·)`.
pub fn simulate_chain(
    coeff: &CoefficientModel,
    innov: &InnovationModel,
    x0: f64,
    grid: &GridSpec,
    stream: &RandomStream,
) -> PathSample {
    let mut rng = stream.rng();
    let steps = grid.fine_steps();
    let sh = grid.h.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = x0;
    values.push(x);
    for _ in 0..steps {
        x += coeff.drift(x) * grid.h + sh * innov.sample(x, &mut rng);
        values.push(x);
    }
    PathSample::on_grid(values, grid.h, Origin::Chain)
}

/// Keeps every `k`-th point, starting with the first.
pub fn subsample(path: &PathSample, k: usize) -> Result<PathSample> {
    let len = path.len();
    if k == 0 || len == 0 || !(len - 1).is_multiple_of(k) {
        return Err(Error::Subsample { len, k });
    }
    Ok(PathSample {
        times: path.times.iter().step_by(k).copied().collect(),
        values: path.values.iter().step_by(k).copied().collect(),
        origin: path.origin,
    })
}

/// Euler–Maruyama: `Y ← Y + m(Y) δ + σ(Y) √δ Z`.
pub fn simulate_diffusion_euler(
    coeff: &CoefficientModel,
    x0: f64,
    step: f64,
    steps: usize,
    stream: &RandomStream,
) -> Result<PathSample> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("Euler step must be > 0, got {step}")));
    }
    let mut rng = stream.rng();
    let sd = step.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut y = x0;
    values.push(y);
    for _ in 0..steps {
        y += coeff.drift(y) * step + coeff.sigma(y) * sd * standard_normal(&mut rng);
        values.push(y);
    }
    Ok(PathSample::on_grid(values, step, Origin::Euler))
}

/// Coarse path of `dY = dt + dW` with exact `N(kh, kh)` increments.
pub fn simulate_diffusion_exact_unit(
    coeff: &CoefficientModel,
    x0: f64,
    grid: &GridSpec,
    stream: &RandomStream,
) -> Result<PathSample> {
    if !coeff.is_unit() {
        return Err(Error::RequiresUnitModel("exact unit-model simulation"));
    }
    sample_coarse_diffusion(coeff, x0, grid, stream)
}

/// One exact transition over `dt` for models with a Gaussian transition law.
pub(crate) fn exact_step<R: Rng + ?Sized>(coeff: &CoefficientModel, y: f64, dt: f64, rng: &mut R) -> Option<f64> {
    match *coeff {
        CoefficientModel::Constant { drift, sigma } => Some(y + drift * dt + sigma * dt.sqrt() * standard_normal(rng)),
        CoefficientModel::OrnsteinUhlenbeck { rate, sigma } => {
            let (decay, var) = ou_transition(rate, sigma, dt);
            Some(y * decay + var.sqrt() * standard_normal(rng))
        }
        _ => None,
    }
}

/// `(e^{-rate dt}, variance)` of the OU transition over `dt`.
pub(crate) fn ou_transition(rate: f64, sigma: f64, dt: f64) -> (f64, f64) {
    let decay = (-rate * dt).exp();
    let var = if rate.abs() * dt < 1e-8 {
        sigma * sigma * dt
    } else {
        sigma * sigma * -(-2.0 * rate * dt).exp_m1() / (2.0 * rate)
    };
    (decay, var)
}

/// A sample of `Q_h`: the diffusion observed at `kh, 2kh, ..., nkh`.
///
/// Exact for constant and OU coefficients; other models use Euler with
/// the fine step `h`, subsampled.
pub fn sample_coarse_diffusion(
    coeff: &CoefficientModel,
    x0: f64,
    grid: &GridSpec,
    stream: &RandomStream,
) -> Result<PathSample> {
    let dt = grid.coarse_step();
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(grid.n + 1);
    let mut y = x0;
    values.push(y);
    for _ in 0..grid.n {
        match exact_step(coeff, y, dt, &mut rng) {
            Some(next) => y = next,
            None => {
                let fine = simulate_diffusion_euler(coeff, x0, grid.h, grid.fine_steps(), stream)?;
                return subsample(&fine, grid.k);
            }
        }
        values.push(y);
    }
    Ok(PathSample::on_grid(values, dt, Origin::ExactDiffusion))
}

/// Brownian bridge on `[0, 1]` at `mesh + 1` equidistant points.
///
/// Dyadic meshes use the midpoint construction; other meshes are filled
/// left to right from the exact conditional law.
pub fn simulate_bridge<R: Rng + ?Sized>(rng: &mut R, mesh: usize) -> Result<Vec<f64>> {
    let mut b = vec![0.0; mesh + 1];
    fill_bridge(rng, &mut b)?;
    Ok(b)
}

/// In-place version of [`simulate_bridge`]; `b.len() - 1` is the mesh.
pub fn fill_bridge<R: Rng + ?Sized>(rng: &mut R, b: &mut [f64]) -> Result<()> {
    let mesh = b.len().saturating_sub(1);
    if mesh < 2 {
        return Err(Error::InvalidParameter(format!("bridge mesh must be >= 2, got {mesh}")));
    }
    b[0] = 0.0;
    b[mesh] = 0.0;
    if mesh.is_power_of_two() {
        let mut stride = mesh;
        while stride > 1 {
            let half = stride / 2;
            // Conditional variance of the midpoint of an interval of length stride/mesh.
            let sd = (0.25 * stride as f64 / mesh as f64).sqrt();
            let mut left = 0;
            while left < mesh {
                let right = left + stride;
                b[left + half] = 0.5 * (b[left] + b[right]) + sd * standard_normal(rng);
                left = right;
            }
            stride = half;
        }
    } else {
        let dt = 1.0 / mesh as f64;
        for j in 0..mesh - 1 {
            let rest = 1.0 - j as f64 * dt;
            let a = (rest - dt) / rest;
            b[j + 1] = a * b[j] + (dt * a).sqrt() * standard_normal(rng);
        }
    }
    Ok(())
}

/// CSV with columns `path_id,time,value,origin`.
pub fn write_paths_csv<W: Write>(out: &mut W, paths: &[(u64, PathSample)]) -> io::Result<()> {
    writeln!(out, "path_id,time,value,origin")?;
    for (id, p) in paths {
        for (t, v) in p.times.iter().zip(&p.values) {
            writeln!(out, "{id},{t},{v},{}", p.origin.as_str())?;
        }
    }
    Ok(())
}
