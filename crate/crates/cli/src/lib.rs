//! Command-line front end: configuration, subcommands and artifact writers.

pub mod commands;
pub mod config;
pub mod figures;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{Format, OutputConfig, RunConfig, SweepAxis};
use crate::output::{Provenance, Writer};

#[derive(Debug, Parser)]
#[command(name = "multifreq", version, about = "Multi-frequency control of anharmonic circuits")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.path).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override a config key, e.g. `--set model.ns=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Artifact format (overrides output.format).
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Record the wall-clock time in artifacts (breaks byte-identical reruns).
    #[arg(long, global = true)]
    pub timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Level energies and drive matrix elements.
    Model,
    /// Integrate the Schrödinger equation for the configured pulse.
    Simulate,
    /// Floquet spectrum and reconstructed populations of a square pulse.
    Floquet,
    /// Closed-form predictions for the configured pulse.
    Predict,
    /// Calibrate a two-tone or Gaussian pulse.
    Optimize,
    /// Parameter sweep with a JSON sidecar.
    Sweep {
        /// Swept quantity (overrides sweep.axis).
        #[arg(long)]
        axis: Option<SweepAxis>,
    },
    /// Dataset behind figure N.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=6))]
        number: u8,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Model => "model".into(),
            Command::Simulate => "simulate".into(),
            Command::Floquet => "floquet".into(),
            Command::Predict => "predict".into(),
            Command::Optimize => "optimize".into(),
            Command::Sweep { .. } => "sweep".into(),
            Command::Figure { number } => format!("figure {number}"),
        }
    }

    fn optimizes(&self) -> bool {
        matches!(self, Command::Optimize | Command::Sweep { .. } | Command::Figure { .. })
    }
}

/// Tolerances worth recording for `command`.
fn tolerances(cfg: &RunConfig, command: &Command) -> Vec<(String, f64)> {
    let mut t = vec![("simulation.tol".to_string(), cfg.simulation.tol)];
    if matches!(command, Command::Floquet | Command::Figure { number: 1 }) {
        for (i, &c) in cfg.floquet.cutoffs.iter().enumerate() {
            t.push((format!("floquet.cutoffs[{i}]"), c as f64));
        }
    }
    if command.optimizes() {
        t.push(("optimize.error_change_tol".into(), cfg.optimize.error_change_tol));
    }
    t
}

/// Loads the configuration, runs the command and returns its summary line.
pub fn run(cli: &Cli) -> Result<String> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(dir) = &cli.out {
        cfg.output.path = dir.display().to_string();
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            anyhow::bail!("--jobs: must be at least 1");
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    // the digest covers the physics, not where or how results are written
    let digest_input = RunConfig {
        output: OutputConfig::default(),
        ..cfg.clone()
    }
    .canonical();
    let provenance = Provenance::new(&cli.command.name(), &digest_input, tolerances(&cfg, &cli.command), cli.timestamp);
    let ctx = Context {
        sys: cfg.system()?,
        units: cfg.units(),
        writer: Writer {
            dir: PathBuf::from(&cfg.output.path),
            format: cfg.output.format,
            provenance,
        },
        cfg,
    };
    match &cli.command {
        Command::Model => commands::model(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Floquet => commands::floquet_cmd(&ctx),
        Command::Predict => commands::predict(&ctx),
        Command::Optimize => commands::optimize(&ctx),
        Command::Sweep { axis } => commands::sweep(&ctx, *axis),
        Command::Figure { number } => figures::figure(&ctx, *number),
    }
}
