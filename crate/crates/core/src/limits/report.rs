use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::edgeworth::EdgeworthContext;
use crate::models::Regime;

/// One reported statistic. A zero `stderr` marks a deterministic quantity
/// or a test statistic without a sampling error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64, n: usize) -> Self {
        Estimate {
            value,
            stderr,
            n,
            target: None,
        }
    }

    pub fn exact(value: f64, n: usize) -> Self {
        Estimate::new(value, 0.0, n)
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub n: usize,
    pub k: usize,
    pub h: f64,
    pub model: String,
    pub innovation: String,
    /// Standardized third moment of the innovations.
    pub mu3: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl DesignPoint {
    /// Design point of an experiment built on `ctx`.
    pub fn of(ctx: &EdgeworthContext, seed: u64, n_paths: usize) -> Self {
        let grid = ctx.grid();
        DesignPoint {
            n: grid.n,
            k: grid.k,
            h: grid.h,
            model: ctx.coefficients().id(),
            innovation: ctx.innovations().id(),
            mu3: ctx.innovations().standardized_mu3(),
            seed,
            n_paths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub design: DesignPoint,
    pub regime: Regime,
    pub estimates: BTreeMap<String, Estimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Kept out of the serialized report so identical runs serialize identically.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ExperimentReport {
    pub fn new(experiment: &str, design: DesignPoint, regime: Regime) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            design,
            regime,
            estimates: BTreeMap::new(),
            notes: Vec::new(),
            wall_clock: Duration::ZERO,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, estimate: Estimate) {
        self.estimates.insert(name.into(), estimate);
    }

    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.estimates.get(name)
    }

    /// Looks up an estimate that the experiment always produces.
    pub fn value(&self, name: &str) -> f64 {
        self.estimates
            .get(name)
            .unwrap_or_else(|| panic!("report {} has no estimate {name}", self.experiment))
            .value
    }
}
