use serde::{Deserialize, Serialize};

use crate::edgeworth::{delta1, delta2, EdgeworthContext};
use crate::error::{Error, Result};
use crate::models::GridSpec;
use crate::paths::{Origin, PathSample};

/// `Δᵢ = δ₁(Yᵢ₋₁, Yᵢ)` (and optionally `δ₂`) along one coarse diffusion path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSequence {
    pub deltas: Vec<f64>,
    pub deltas2: Option<Vec<f64>>,
    pub path_id: u64,
    pub grid: GridSpec,
}

/// `∏(1 + Δᵢ)` as `sign · exp(log_abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProduct {
    pub log_abs: f64,
    pub sign: f64,
    /// Number of factors with `1 + Δᵢ ≤ 0`.
    pub nonpositive: usize,
}

impl LogProduct {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }

    pub fn is_finite(&self) -> bool {
        self.log_abs < f64::INFINITY && !self.log_abs.is_nan()
    }
}

impl DeltaSequence {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn log_product(&self) -> LogProduct {
        let mut out = LogProduct {
            log_abs: 0.0,
            sign: 1.0,
            nonpositive: 0,
        };
        for d in &self.deltas {
            let f = 1.0 + d;
            if f <= 0.0 {
                out.nonpositive += 1;
            }
            if f < 0.0 {
                out.sign = -out.sign;
            }
            out.log_abs += f.abs().ln();
        }
        out
    }

    /// `|1 − ∏(1 + Δᵢ)|`.
    pub fn l1_deviation(&self) -> f64 {
        (1.0 - self.log_product().value()).abs()
    }

    pub fn sum(&self) -> f64 {
        self.deltas.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.deltas.iter().map(|d| d * d).sum()
    }

    pub fn sup_abs(&self) -> f64 {
        self.deltas.iter().fold(0.0, |a, d| a.max(d.abs()))
    }
}

/// `Δᵢ` along a coarse diffusion path with `n + 1` points.
pub fn delta_sequence(
    ctx: &EdgeworthContext,
    path: &PathSample,
    path_id: u64,
    second_order: bool,
) -> Result<DeltaSequence> {
    if path.origin == Origin::Chain {
        return Err(Error::InvalidParameter(
            "Δ sequences are evaluated along diffusion paths, not chain paths".into(),
        ));
    }
    let grid = *ctx.grid();
    if path.len() != grid.n + 1 {
        return Err(Error::InvalidParameter(format!(
            "path has {} points, the grid needs n + 1 = {}",
            path.len(),
            grid.n + 1
        )));
    }
    let pairs = path.values.windows(2);
    let deltas = pairs
        .clone()
        .map(|w| delta1(ctx, w[0], w[1]))
        .collect::<Result<Vec<_>>>()?;
    let deltas2 = if second_order {
        Some(pairs.map(|w| delta2(ctx, w[0], w[1])).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    Ok(DeltaSequence {
        deltas,
        deltas2,
        path_id,
        grid,
    })
}
