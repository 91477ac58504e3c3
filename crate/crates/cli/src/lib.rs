//! Batch front end: loads an experiment config, runs one command and writes
//! JSON/CSV artifacts plus a manifest into the output directory.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on a
//! configuration, input or computation error.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use cfkmer_core::Backend;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ExperimentConfig, Mode};
use crate::manifest::{Outcome, Session};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Compute(String),
}

macro_rules! compute_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Compute(e.to_string())
            }
        }
    )*};
}

compute_error!(
    cfkmer_core::TvError,
    cfkmer_core::ExcursionError,
    cfkmer_core::KmerError,
    cfkmer_core::SimError,
    cfkmer_core::PhyloError
);

#[derive(Debug, Parser)]
#[command(name = "cfkmer", version, about = "k-mer law experiments on a pair of trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// rational or float.
    #[arg(long, global = true)]
    pub backend: Option<Backend>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "CFKMER_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate sequences at every leaf and marked point of both trees.
    Simulate,
    /// Exact distance and overlap of the leaf count laws over a range of m.
    TvExact,
    /// Classifier lower bound on the distance between the leaf count laws.
    TvMc,
    /// Exact distances along the reduction chain, plus the Markov equality.
    AuditReductions,
    /// Exhaustive checks of the block identities.
    VerifyLemmas,
    /// Excursion moments, mean symmetry and unit-step witnesses.
    Excursions,
    /// Local CLT, projection, independence and tail checks.
    CltCheck,
    /// Long-format plot table from series files.
    PlotData {
        /// Series CSV files; defaults to the config list or the known
        /// series in the output directory.
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    pub fn mode(&self) -> Mode {
        match self {
            Command::Simulate => Mode::Simulate,
            Command::TvExact => Mode::TvExact,
            Command::TvMc => Mode::TvMc,
            Command::AuditReductions => Mode::AuditReductions,
            Command::VerifyLemmas => Mode::VerifyLemmas,
            Command::Excursions => Mode::Excursions,
            Command::CltCheck => Mode::CltCheck,
            Command::PlotData { .. } => Mode::PlotData,
        }
    }
}

/// Loads the config and applies flag overrides.
pub fn resolve_config(command: &Command, flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(o) = &flags.out {
        cfg.output.dir = o.clone();
    }
    if let Some(b) = flags.backend {
        cfg.backend = Some(b);
    }
    if let Command::PlotData { inputs } = command {
        if !inputs.is_empty() {
            cfg.plot.inputs = inputs.clone();
        }
    }
    cfg.validate(command.mode())?;
    Ok(cfg)
}

/// Runs one command with an already resolved config.
pub fn run(mode: Mode, config: &ExperimentConfig, threads: Option<usize>) -> Result<Outcome, CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut session = Session::new(&config.output.dir, mode)?;
        commands::execute(mode, config, &mut session)?;
        session.finish(config)
    })
}

/// Parses `args`, runs the command, reports on stderr and returns the exit
/// status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
        }
    };
    let outcome = resolve_config(&cli.command, &cli.flags)
        .and_then(|cfg| run(cli.command.mode(), &cfg, cli.flags.threads));
    match outcome {
        Ok(o) => {
            for c in &o.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                if c.detail.is_empty() {
                    eprintln!("{status} {}", c.name);
                } else {
                    eprintln!("{status} {}: {}", c.name, c.detail);
                }
            }
            println!("{}", o.manifest.display());
            if o.passed {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
