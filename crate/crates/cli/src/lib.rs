//! Configuration, dispatch and artifact emission for the `cohobs` binary.

pub mod artifact;
pub mod check;
pub mod config;
pub mod error;
pub mod reproduce;
pub mod simulate;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use cohobs_core::SynthesisOptions;

use crate::config::{load_config, Mode};
use crate::error::{CliError, CliResult};
use crate::reproduce::Example;

#[derive(Debug, Parser)]
#[command(name = "cohobs", version, about = "Coherent quantum observer synthesis and simulation")]
pub struct Cli {
    /// Realizability tolerance.
    #[arg(long, global = true, default_value_t = cohobs_core::realizability::DEFAULT_REALIZABILITY_TOL)]
    pub tol: f64,
    /// Override the integration step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Only report errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Realizability, detectability and stability of the plant.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Build an observer and write it with its report as JSON.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate the joint moments and write the metric time series.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate a built-in example bundle.
    Reproduce {
        #[arg(value_enum)]
        example: Example,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

impl Cli {
    fn options(&self) -> CliResult<SynthesisOptions> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::validation("--tol", format!("must be positive, got {}", self.tol)));
        }
        Ok(SynthesisOptions { tol: self.tol, ..SynthesisOptions::default() })
    }
}

/// Runs one command, printing progress to stdout; returns the process exit code.
pub fn run(cli: &Cli) -> CliResult<i32> {
    let opts = cli.options()?;
    let say = |s: &str| {
        if !cli.quiet {
            println!("{s}");
        }
    };
    match &cli.command {
        Command::Check { config, json } => {
            let cfg = load_config(config)?;
            let summary = check::check_plant(&cfg.plant, cli.tol)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
            } else {
                say(summary.render().trim_end());
            }
            Ok(if summary.realizable { 0 } else { 3 })
        }
        Command::Synthesize { config, mode, out } => {
            let cfg = load_config(config)?.with_dt(cli.dt)?;
            let synth = artifact::synthesize(&cfg, *mode, &opts)?;
            artifact::write_artifact(out, &synth.artifact)?;
            say(&format!("wrote {}", out.display()));
            match &synth.artifact.message {
                Some(msg) if !synth.artifact.feasible => {
                    eprintln!("infeasible: {msg}");
                    Ok(2)
                }
                _ => Ok(0),
            }
        }
        Command::Simulate { config, out } => {
            let cfg = load_config(config)?.with_dt(cli.dt)?;
            let sim = simulate::simulate(&cfg, &opts)?;
            simulate::write_csv(out, &sim.rows, &cfg.metrics)?;
            say(&format!("wrote {} ({} rows)", out.display(), sim.rows.len()));
            Ok(0)
        }
        Command::Reproduce { example, out_dir } => {
            for line in reproduce::reproduce(*example, out_dir, cli.dt, &opts)? {
                say(&line);
            }
            Ok(0)
        }
    }
}
