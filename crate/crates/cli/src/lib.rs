//! Command-line front end: configuration parsing, experiment orchestration
//! and CSV emission with reproducibility metadata.
//!
//! Every command computes all of its outputs before touching the output
//! directory, so a failed run leaves no files behind.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::RunConfig;
pub use error::CliError;
pub use output::Artifact;

#[derive(Debug, Parser)]
#[command(
    name = "levymlmc",
    version,
    about = "Multilevel Monte Carlo for Lévy-driven SDEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory (default `out`, or the configured `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the multilevel estimator at `plan.delta`.
    Estimate {
        /// Also write the coupled pair of replication 0 at this level.
        #[arg(long, value_name = "K")]
        dump_skeleton: Option<usize>,
    },
    /// Pilot statistics per level and the variance-decay regression.
    Levels,
    /// Repeated estimators and normality of the normalised errors.
    Clt,
    /// Cost curve g(M, β) and the recommended refinement factor.
    Tune,
    /// Variance oracles for the limit error.
    Rho,
    /// Ratio diagnostics of the level schedule.
    ValidateSchedule,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate { .. } => "estimate",
            Command::Levels => "levels",
            Command::Clt => "clt",
            Command::Tune => "tune",
            Command::Rho => "rho",
            Command::ValidateSchedule => "validate-schedule",
        }
    }
}

#[derive(Serialize)]
struct RunInfo<'a> {
    version: &'static str,
    command: &'static str,
    config_hash: String,
    seed: u64,
    files: Vec<&'a str>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run: RunInfo<'a>,
    config: &'a RunConfig,
}

/// Every output of `command` for `cfg`, including the manifest.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    use commands::*;
    let mut artifacts = match command {
        Command::Estimate { dump_skeleton: k } => {
            let run = cmd_estimate(cfg)?;
            let mut a = render_estimate(cfg, &run);
            if let Some(k) = k {
                a.push(dump_skeleton(cfg, &run, k)?);
            }
            a
        }
        Command::Levels => render_levels(cfg, &cmd_levels(cfg)?),
        Command::Clt => render_clt(cfg, &cmd_clt(cfg)?),
        Command::Tune => render_tune(cfg, &cmd_tune(cfg)?),
        Command::Rho => render_rho(cfg, &cmd_rho(cfg)?),
        Command::ValidateSchedule => render_validate_schedule(cfg, &cmd_validate_schedule(cfg)?),
    };
    let header = output::Header {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };
    let manifest = Manifest {
        run: RunInfo {
            version: env!("CARGO_PKG_VERSION"),
            command: command.name(),
            config_hash: header.config_hash.clone(),
            seed: cfg.seed,
            files: artifacts.iter().map(|a| a.name.as_str()).collect(),
        },
        config: cfg,
    };
    let body = toml::to_string(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    artifacts.push(Artifact {
        name: "manifest.toml".into(),
        contents: header.line() + &body,
    });
    Ok(artifacts)
}

fn resolve(cli: &Cli) -> Result<(RunConfig, PathBuf), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn run_parsed(cli: &Cli) -> Result<(PathBuf, Vec<String>), CliError> {
    let (cfg, out) = resolve(cli)?;
    let work = || execute(cli.command, &cfg);
    let artifacts = match cli.workers {
        Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    output::write_all(&out, &artifacts)?;
    Ok((out, artifacts.into_iter().map(|a| a.name).collect()))
}

/// Runs the CLI on `args` and returns the process exit code. Success prints
/// one JSON line to stdout; failure prints a JSON error record to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(&cli) {
        Ok((out, files)) => {
            let line =
                serde_json::json!({ "command": cli.command.name(), "out": out, "files": files });
            println!("{line}");
            0
        }
        Err(e) => {
            let rec = e.record();
            eprintln!(
                "{}",
                serde_json::to_string(&rec).expect("serialisable error")
            );
            rec.exit_code
        }
    }
}
