//! `fhsim`: pipeline driver for the 1D Fermi-Hubbard simulation workbench.
//!
//! Stages: build -> compile -> layout -> simulate -> mitigate -> analyze,
//! all driven by one JSON config; `--repro` produces desk-scale analogs of
//! the headline data sets. Exit codes: 0 success, 2 config/input error,
//! 3 size-cap violation, 4 numerical-tolerance failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "fhsim", version, about)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Pipeline stage to run.
    #[arg(long, value_enum)]
    stage: Option<Stage>,

    /// Reproduce a desk-scale figure analog
    /// (fig2, fig-s4, fig-s6, fig-s8, fig-s10, fig-s13).
    #[arg(long)]
    repro: Option<String>,

    /// Number of twirled circuit variants to emit in the compile stage.
    #[arg(long, default_value_t = 0)]
    twirl: usize,

    /// Bad-qubit exclusion threshold (multiples of the device median).
    #[arg(long, default_value_t = 5.0)]
    exclude_factor: f64,

    /// Optional device calibration JSON for the layout stage.
    #[arg(long)]
    calibration: Option<PathBuf>,

    /// Number of ranked layouts to write.
    #[arg(long, default_value_t = 20)]
    top: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Build,
    Compile,
    Layout,
    Simulate,
    Mitigate,
    Analyze,
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(figure) = &cli.repro {
        let seed = cli.seed.unwrap_or(7);
        let out = cli
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("out_{}", figure.replace('-', "_"))));
        return commands::cmd_repro(figure, seed, &out);
    }
    let Some(config_path) = &cli.config else {
        bail!("either --config with --stage, or --repro, is required");
    };
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let Some(stage) = cli.stage else {
        bail!("--stage is required when running from a config");
    };
    match stage {
        Stage::Build => commands::cmd_build(&cfg, &out),
        Stage::Compile => commands::cmd_compile(&cfg, &out, cli.twirl),
        Stage::Layout => commands::cmd_layout(
            &cfg,
            &out,
            cli.exclude_factor,
            cli.calibration.as_deref(),
            cli.top,
        ),
        Stage::Simulate => commands::cmd_simulate(&cfg, &out),
        Stage::Mitigate => commands::cmd_mitigate(&cfg, &out),
        Stage::Analyze => commands::cmd_analyze(&cfg, &out),
    }
    .with_context(|| format!("stage failed for config {}", config_path.display()))
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<fhsim_core::Error>() {
            return match core {
                fhsim_core::Error::SizeLimit { .. } => 3,
                fhsim_core::Error::Synthesis { .. } => 4,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
