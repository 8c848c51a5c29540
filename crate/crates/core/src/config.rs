//! TOML run configuration. Every block has explicit defaults and rejects
//! unknown keys.

use serde::{Deserialize, Serialize};

use crate::edgeworth::{EdgeworthContext, EdgeworthQuad, EvalMode};
use crate::error::{Error, Result};
use crate::limits::{EulerBenchConfig, McConfig, RemainderConfig};
use crate::models::{CoefficientModel, GridSpec, InnovationModel, ProbeConfig, RegimeTargets};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Unit {},
    ZeroDrift {},
    Constant { drift: f64, sigma: f64 },
    Smooth { a: f64, b: f64 },
    OrnsteinUhlenbeck { rate: f64, sigma: f64 },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Unit {}
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<CoefficientModel> {
        match *self {
            ModelSpec::Unit {} => Ok(CoefficientModel::unit()),
            ModelSpec::ZeroDrift {} => Ok(CoefficientModel::zero_drift()),
            ModelSpec::Constant { drift, sigma } => CoefficientModel::constant(drift, sigma),
            ModelSpec::Smooth { a, b } => CoefficientModel::smooth(a, b),
            ModelSpec::OrnsteinUhlenbeck { rate, sigma } => CoefficientModel::ornstein_uhlenbeck(rate, sigma),
        }
    }
}

/// Standardized innovation law; `mu3` and `mu4` are the moments before scaling by `σ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnovationSpec {
    Gaussian {},
    Skewed { mu3: f64, mu4: f64 },
}

impl Default for InnovationSpec {
    fn default() -> Self {
        InnovationSpec::Gaussian {}
    }
}

impl InnovationSpec {
    pub fn build(&self, coeff: &CoefficientModel) -> Result<InnovationModel> {
        match *self {
            InnovationSpec::Gaussian {} => Ok(InnovationModel::gaussian(coeff)),
            InnovationSpec::Skewed { mu3, mu4 } => InnovationModel::skewed(coeff, mu3, mu4),
        }
    }
}

/// Evaluation points for the `density` and `edgeworth` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointsConfig {
    /// Times; empty means the coarse step `kh` only.
    pub ts: Vec<f64>,
    pub x: f64,
    /// `y` runs over `x + m t ± y_sds·√t` in `points` steps.
    pub y_sds: f64,
    pub points: usize,
    /// Partial derivatives to tabulate, such as `y`, `yyy` or `dx2`.
    pub partials: Vec<String>,
}

impl Default for PointsConfig {
    fn default() -> Self {
        PointsConfig {
            ts: Vec::new(),
            x: 0.0,
            y_sds: 4.0,
            points: 9,
            partials: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    /// The fine chain, subsampled to the coarse grid.
    Chain,
    /// The fine chain at every step.
    ChainFine,
    /// The diffusion on the coarse grid.
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub kind: PathKind,
    pub n_paths: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            kind: PathKind::Chain,
            n_paths: 4,
        }
    }
}

/// The `n/k → c` experiment: `n = round(c·k)` at fixed `kh`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltConfig {
    pub c: f64,
    pub kh: f64,
}

impl Default for CltConfig {
    fn default() -> Self {
        CltConfig { c: 1.0, kh: 0.05 }
    }
}

impl CltConfig {
    /// Grid with `n = round(c·k)` and `h = kh/k`.
    pub fn grid(&self, k: usize) -> Result<GridSpec> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("clt.c must be > 0, got {}", self.c)));
        }
        let n = (self.c * k as f64).round().max(1.0) as usize;
        GridSpec::new(self.kh / k as f64, k, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: OutputFormat,
    /// Output file; standard output when absent.
    pub path: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            format: OutputFormat::Json,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub innovation: InnovationSpec,
    pub grid: GridSpec,
    pub regime: RegimeTargets,
    pub probe: ProbeConfig,
    pub mc: McConfig,
    pub quad: EdgeworthQuad,
    pub eval_mode: EvalMode,
    pub points: PointsConfig,
    pub simulate: SimulateConfig,
    pub clt: CltConfig,
    pub remainder: RemainderConfig,
    pub euler: EulerBenchConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSpec::default(),
            innovation: InnovationSpec::default(),
            grid: GridSpec {
                h: 0.001,
                k: 100,
                n: 10,
            },
            regime: RegimeTargets::default(),
            probe: ProbeConfig::default(),
            mc: McConfig::default(),
            quad: EdgeworthQuad::default(),
            eval_mode: EvalMode::default(),
            points: PointsConfig::default(),
            simulate: SimulateConfig::default(),
            clt: CltConfig::default(),
            remainder: RemainderConfig::default(),
            euler: EulerBenchConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and checks a TOML document; missing blocks take their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always serializable")
    }

    pub fn check(&self) -> Result<()> {
        self.grid.check()?;
        if self.mc.n_paths == 0 {
            return Err(Error::InvalidParameter("mc.n_paths must be >= 1".into()));
        }
        if self.points.points == 0 {
            return Err(Error::InvalidParameter("points.points must be >= 1".into()));
        }
        self.innovations()?;
        Ok(())
    }

    pub fn coefficients(&self) -> Result<CoefficientModel> {
        self.model.build()
    }

    pub fn innovations(&self) -> Result<InnovationModel> {
        self.innovation.build(&self.coefficients()?)
    }

    pub fn context(&self) -> Result<EdgeworthContext> {
        self.context_on(self.grid)
    }

    pub fn context_on(&self, grid: GridSpec) -> Result<EdgeworthContext> {
        EdgeworthContext::new(&self.innovations()?, grid, self.quad, self.eval_mode)
    }
}
