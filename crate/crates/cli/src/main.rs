mod args;
mod commands;
mod output;

use std::process::ExitCode;

use chainlimit::config::RunConfig;
use chainlimit::limits::in_pool;
use clap::Parser;

use args::Cli;
use commands::Failure;

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.to_string_lossy().into_owned());
    }
    if let Some(w) = cli.workers {
        cfg.mc.workers = w;
    }
    commands::resolve(&cli.command, &mut cfg)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = std::time::Instant::now();
    let result = load(&cli).and_then(|cfg| {
        // The pool also covers the per-point parallelism inside the density routines.
        in_pool(cfg.mc.workers, || commands::run(&cli.command, &cfg)).map_err(Failure::from)?
    });
    eprintln!(
        "{}: wall-clock {:.3} s",
        cli.command.name(),
        start.elapsed().as_secs_f64()
    );
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
