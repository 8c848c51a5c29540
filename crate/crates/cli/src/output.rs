use std::fs::File;
use std::io::{self, BufWriter, Write};

use chainlimit::config::{OutputFormat, RunConfig};
use chainlimit::limits::ExperimentReport;
use serde::Serialize;

/// Every JSON document the tool writes: version, command and the resolved
/// configuration next to the result.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: serde_json::Value,
    pub result: &'a T,
}

/// The resolved configuration without the worker count, which never affects results.
pub fn echoed_config(cfg: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("run config is serializable");
    if let Some(mc) = v.get_mut("mc").and_then(|m| m.as_object_mut()) {
        mc.remove("workers");
    }
    v
}

pub fn sink(cfg: &RunConfig) -> io::Result<Box<dyn Write>> {
    Ok(match &cfg.output.path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn write_json<T: Serialize>(cfg: &RunConfig, command: &str, result: &T) -> io::Result<()> {
    let env = Envelope {
        tool: "chainlimit",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: echoed_config(cfg),
        result,
    };
    let mut out = sink(cfg)?;
    serde_json::to_writer_pretty(&mut out, &env)?;
    writeln!(out)?;
    out.flush()
}

/// Writes rows as CSV with a header taken from the row type.
pub fn write_csv<T: Serialize>(cfg: &RunConfig, rows: &[T]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink(cfg)?);
    for r in rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    w.flush()
}

#[derive(Serialize)]
struct EstimateRow<'a> {
    experiment: &'a str,
    estimate: &'a str,
    value: f64,
    stderr: f64,
    n: usize,
    target: Option<f64>,
}

pub fn write_reports(cfg: &RunConfig, command: &str, reports: &[ExperimentReport]) -> io::Result<()> {
    for r in reports {
        eprintln!("{}: wall-clock {:.3} s", r.experiment, r.wall_clock.as_secs_f64());
    }
    match cfg.output.format {
        OutputFormat::Json => write_json(cfg, command, &reports),
        OutputFormat::Csv => {
            let rows: Vec<EstimateRow> = reports
                .iter()
                .flat_map(|r| {
                    r.estimates.iter().map(|(name, e)| EstimateRow {
                        experiment: &r.experiment,
                        estimate: name,
                        value: e.value,
                        stderr: e.stderr,
                        n: e.n,
                        target: e.target,
                    })
                })
                .collect();
            write_csv(cfg, &rows)
        }
    }
}
