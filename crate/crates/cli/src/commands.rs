use std::io;

use chainlimit::config::{InnovationSpec, ModelSpec, OutputFormat, PathKind, RunConfig};
use chainlimit::density::{Method, Partial};
use chainlimit::edgeworth::{delta1, delta2, pi1, pi2, EdgeworthContext};
use chainlimit::limits::{
    chain_diffusion_energy, clt_experiment, estimate_q1_q_distance, euler_consistency_experiment,
    sup_scaling_diagnostics, theorem4_remainder_check, ExperimentReport,
};
use chainlimit::models::{validate_assumptions, Regime, ValidationReport};
use chainlimit::paths::{sample_coarse_diffusion, simulate_chain, subsample, write_paths_csv, PathSample};
use chainlimit::rng::RandomStream;
use chainlimit::Error;
use serde::Serialize;

use crate::args::Command;
use crate::output::{sink, write_csv, write_json, write_reports};

pub enum Failure {
    Model(Error),
    Io(io::Error),
    /// The validation report was written but some assumption failed.
    Assumptions(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Model(e) if e.is_numerical() => 3,
            Failure::Model(_) | Failure::Assumptions(_) => 2,
            Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Model(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
            Failure::Assumptions(names) => write!(f, "assumptions failed: {}", names.join(", ")),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Applies subcommand flags to the configuration before it is echoed.
pub fn resolve(cmd: &Command, cfg: &mut RunConfig) -> Result<(), Failure> {
    if let Command::Clt { c, mu3, k } = cmd {
        if let Some(c) = c {
            cfg.clt.c = *c;
        }
        if let Some(mu3) = mu3 {
            let mu4 = match cfg.innovation {
                InnovationSpec::Skewed { mu4, .. } => mu4,
                InnovationSpec::Gaussian {} => 3.0,
            };
            cfg.innovation = InnovationSpec::Skewed { mu3: *mu3, mu4 };
        }
        cfg.grid = cfg.clt.grid(k.unwrap_or(cfg.grid.k))?;
        if cfg.model != (ModelSpec::Unit {}) {
            return Err(Error::RequiresUnitModel("the clt subcommand").into());
        }
    }
    cfg.check()?;
    Ok(())
}

pub fn run(cmd: &Command, cfg: &RunConfig) -> Outcome {
    let name = cmd.name();
    match cmd {
        Command::Validate => validate(cfg, name),
        Command::Simulate => simulate(cfg, name),
        Command::Density => density(cfg, name),
        Command::Edgeworth => edgeworth(cfg, name),
        Command::Regime => {
            let ctx = cfg.context()?;
            let mut reports = vec![
                estimate_q1_q_distance(&ctx, &cfg.mc)?,
                sup_scaling_diagnostics(&ctx, &cfg.mc)?,
                chain_diffusion_energy(&ctx, &cfg.mc)?,
            ];
            for r in &mut reports {
                r.regime = cfg.grid.regime(&cfg.regime);
            }
            Ok(write_reports(cfg, name, &reports)?)
        }
        Command::Clt { .. } => {
            let report = clt_experiment(&cfg.context()?, &cfg.mc, cfg.clt.c)?;
            Ok(write_reports(cfg, name, &[report])?)
        }
        Command::Remainder => {
            let report = theorem4_remainder_check(&cfg.context()?, &cfg.remainder)?;
            Ok(write_reports(cfg, name, &[report])?)
        }
        Command::EulerBench => {
            let report: ExperimentReport = euler_consistency_experiment(&cfg.coefficients()?, &cfg.euler, &cfg.mc)?;
            Ok(write_reports(cfg, name, &[report])?)
        }
    }
}

#[derive(Serialize)]
struct Validation {
    assumptions: ValidationReport,
    regime: Regime,
    /// `C⁻¹k^{−ϰ} < kh < C` fails for the configured grid.
    step_window_violated: bool,
}

fn validate(cfg: &RunConfig, name: &str) -> Outcome {
    let coeff = cfg.coefficients()?;
    let innov = cfg.innovations()?;
    let assumptions = validate_assumptions(&coeff, &innov, &cfg.grid, &cfg.probe)?;
    let failures: Vec<String> = assumptions.failures().into_iter().map(String::from).collect();
    let v = Validation {
        regime: cfg.grid.regime(&cfg.regime),
        step_window_violated: cfg.context()?.regime_violating(),
        assumptions,
    };
    match cfg.output.format {
        OutputFormat::Json => write_json(cfg, name, &v)?,
        OutputFormat::Csv => write_csv(cfg, &v.assumptions.checks)?,
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assumptions(failures))
    }
}

#[derive(Serialize)]
struct SimulatedPath {
    path_id: u64,
    #[serde(flatten)]
    path: PathSample,
}

fn simulate(cfg: &RunConfig, name: &str) -> Outcome {
    let coeff = cfg.coefficients()?;
    let innov = cfg.innovations()?;
    let paths = (0..cfg.simulate.n_paths as u64)
        .map(|i| {
            let stream = RandomStream::new(cfg.mc.seed, i);
            let path = match cfg.simulate.kind {
                PathKind::ChainFine => simulate_chain(&coeff, &innov, cfg.mc.x0, &cfg.grid, &stream),
                PathKind::Chain => subsample(
                    &simulate_chain(&coeff, &innov, cfg.mc.x0, &cfg.grid, &stream),
                    cfg.grid.k,
                )?,
                PathKind::Diffusion => sample_coarse_diffusion(&coeff, cfg.mc.x0, &cfg.grid, &stream)?,
            };
            Ok((i, path))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    match cfg.output.format {
        OutputFormat::Json => {
            let rows: Vec<SimulatedPath> = paths
                .into_iter()
                .map(|(path_id, path)| SimulatedPath { path_id, path })
                .collect();
            write_json(cfg, name, &rows)?;
        }
        OutputFormat::Csv => {
            let mut out = sink(cfg)?;
            write_paths_csv(&mut out, &paths)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// `(t, y)` evaluation points: `y` spans `x + m(x)t ± y_sds·σ(x)√t`.
fn points(cfg: &RunConfig, ctx: &EdgeworthContext) -> Vec<(f64, f64)> {
    let p = &cfg.points;
    let ts = if p.ts.is_empty() {
        vec![cfg.grid.coarse_step()]
    } else {
        p.ts.clone()
    };
    let coeff = ctx.coefficients();
    let mut out = Vec::new();
    for t in ts {
        let center = p.x + coeff.drift(p.x) * t;
        let half = p.y_sds * coeff.sigma(p.x) * t.sqrt();
        for i in 0..p.points {
            let u = if p.points == 1 {
                0.0
            } else {
                2.0 * i as f64 / (p.points - 1) as f64 - 1.0
            };
            out.push((t, center + u * half));
        }
    }
    out
}

#[derive(Serialize)]
struct DensityRow {
    t: f64,
    x: f64,
    y: f64,
    quantity: String,
    value: f64,
    stderr: f64,
    method: Method,
}

fn density(cfg: &RunConfig, name: &str) -> Outcome {
    let ctx = cfg.context()?;
    let partials = cfg
        .points
        .partials
        .iter()
        .map(|s| {
            Partial::parse(s)
                .map(|p| (s.clone(), p))
                .ok_or_else(|| Error::Config(format!("unknown partial derivative {s:?}")))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let x = cfg.points.x;
    let mut rows = Vec::new();
    for (t, y) in points(cfg, &ctx) {
        let est = ctx.density().estimate(t, x, y)?;
        rows.push(DensityRow {
            t,
            x,
            y,
            quantity: "p".into(),
            value: est.value,
            stderr: est.stderr,
            method: est.method,
        });
        for (label, which) in &partials {
            let method = if ctx.density().is_closed_form() && !cfg.quad.deriv.force_fd {
                Method::ClosedForm
            } else {
                est.method
            };
            rows.push(DensityRow {
                t,
                x,
                y,
                quantity: label.clone(),
                value: ctx.density().derivative(t, x, y, *which, &cfg.quad.deriv)?,
                stderr: 0.0,
                method,
            });
        }
    }
    match cfg.output.format {
        OutputFormat::Json => write_json(cfg, name, &rows)?,
        OutputFormat::Csv => write_csv(cfg, &rows)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct EdgeworthRow {
    t: f64,
    x: f64,
    y: f64,
    p: f64,
    pi1: f64,
    pi2_kurtosis: f64,
    pi2_nested: f64,
    pi2_frozen: f64,
    pi2: f64,
    /// Only at `t = kh`, where the ratios are defined.
    delta1: Option<f64>,
    delta2: Option<f64>,
    flagged: bool,
}

fn edgeworth(cfg: &RunConfig, name: &str) -> Outcome {
    let ctx = cfg.context()?;
    let x = cfg.points.x;
    let kh = cfg.grid.coarse_step();
    let mut rows = Vec::new();
    for (t, y) in points(cfg, &ctx) {
        let a = pi1(&ctx, t, x, y)?;
        let b = pi2(&ctx, t, x, y)?;
        let at_kh = (t - kh).abs() <= 1e-12 * kh;
        rows.push(EdgeworthRow {
            t,
            x,
            y,
            p: ctx.density().value(t, x, y)?,
            pi1: a.value,
            pi2_kurtosis: b.kurtosis.value,
            pi2_nested: b.nested.value,
            pi2_frozen: b.frozen.value,
            pi2: b.value(),
            delta1: if at_kh { Some(delta1(&ctx, x, y)?) } else { None },
            delta2: if at_kh { Some(delta2(&ctx, x, y)?) } else { None },
            flagged: a.flagged || b.flagged(),
        });
    }
    match cfg.output.format {
        OutputFormat::Json => write_json(cfg, name, &rows)?,
        OutputFormat::Csv => write_csv(cfg, &rows)?,
    }
    Ok(())
}
