//! Config-driven batch runs.
//!
//! ```text
//! barriertop <command> --config run.json [--out DIR] [--h 0.1,0.05] [--oracle]
//! ```
//!
//! Every command writes its artifacts plus `config.json` (the effective
//! config) and `manifest.json` into the output directory. Exit status is 0 on
//! success, 1 when a numerical step fails (the manifest records where), and
//! 2 for an invalid config or command line. `BARRIERTOP_THREADS` caps the
//! worker pool.

mod commands;
mod config;
mod manifest;

pub use commands::ORACLE_TOLERANCE;
pub use config::{CommandOptions, ContourSpec, GridSpec, Prescription, RunConfig, ScalingKind, ScalingSpec, StripSpec};
pub use manifest::{sha256_hex, ArtifactRecord, RunManifest, Versions, WallTime};

use crate::{Error, Result};
use clap::{Parser, Subcommand};
use manifest::ArtifactSink;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub const THREADS_VAR: &str = "BARRIERTOP_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Resonances near the barrier top and the pseudo-resonance lattice.
    Resonances,
    /// Resolvent norms over the spectral strip.
    ProbeResolvent,
    /// Riesz projectors, resonant states and projection constants.
    Project,
    /// Formal and Picard-refined curves on the incoming manifold.
    Curves,
    /// Cut-off propagation against the truncated resonance expansion.
    Propagate,
    /// Scattering amplitude residues at the resonances.
    Scatter,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Resonances => "resonances",
            Command::ProbeResolvent => "probe-resolvent",
            Command::Project => "project",
            Command::Curves => "curves",
            Command::Propagate => "propagate",
            Command::Scatter => "scatter",
        }
    }

    fn needs_h(self) -> bool {
        self != Command::Curves
    }
}

#[derive(Debug, Parser)]
#[command(name = "barriertop", version, about = "Barrier-top resonances: config-driven runs with checksummed artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: RunFlags,
}

#[derive(Clone, Debug, Default, clap::Args)]
pub struct RunFlags {
    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated h values; overrides `h_list` in the config.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    pub h: Option<Vec<f64>>,
    /// Cross-check resonances against a dense eigensolve.
    #[arg(long, global = true)]
    pub oracle: bool,
}

/// What a finished run left behind.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    pub error: Option<Error>,
}

/// 2 for problems with the request itself, 1 for numerical failures.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Json(_)
        | Error::ForbiddenRadius { .. }
        | Error::InvalidPotential(_)
        | Error::InvalidGrid(_)
        | Error::InvalidScaling(_)
        | Error::DegenerateMaximum(_)
        | Error::DimensionUnsupported(_)
        | Error::SectorUncovered { .. }
        | Error::LongRangeUnsupported(_) => 2,
        _ => 1,
    }
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_VAR}={v:?} is not a positive integer"))),
        },
    }
}

/// Applies the command-line overrides to a config read from disk.
pub fn load_config(path: &Path, flags: &RunFlags) -> Result<RunConfig> {
    let mut config = RunConfig::from_path(path)?;
    if let Some(h) = &flags.h {
        config.h_list = h.clone();
    }
    if let Some(out) = &flags.out {
        config.output = out.clone();
    }
    Ok(config)
}

/// Runs `command` on a parsed config. Errors in the config come back as
/// `Err`; failures after the output directory exists are recorded in the
/// manifest and returned in [`RunOutcome::error`].
pub fn run(command: Command, config: &RunConfig, oracle: bool) -> Result<RunOutcome> {
    let (pot, barrier) = config.validate(command.needs_h())?;
    let threads = thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let config_text = serde_json::to_string_pretty(config)? + "\n";
    let manifest = RunManifest {
        command: command.name().into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        versions: Versions { barriertop: env!("CARGO_PKG_VERSION").into(), manifest_format: 1 },
        h_list: config.h_list.clone(),
        oracle,
        threads: pool.current_num_threads(),
        status: String::new(),
        failure: None,
        artifacts: Vec::new(),
        wall_times: Vec::new(),
        warnings: Vec::new(),
    };
    let mut sink = ArtifactSink::new(&config.output, manifest)?;
    sink.emit("config.json", "cli", "run", None, &config_text)?;
    let mut ctx = commands::Context { config, pot, barrier, oracle, sink, stage: command.name().into() };
    let result = pool.install(|| match command {
        Command::Resonances => commands::resonances(&mut ctx),
        Command::ProbeResolvent => commands::probe_resolvent(&mut ctx),
        Command::Project => commands::project(&mut ctx),
        Command::Curves => commands::curves(&mut ctx),
        Command::Propagate => commands::propagate(&mut ctx),
        Command::Scatter => commands::scatter(&mut ctx),
    });
    let failure = result.as_ref().err().map(|e| format!("{}: {e}", ctx.stage));
    let (manifest_path, manifest) = ctx.sink.finish(failure)?;
    Ok(RunOutcome { manifest_path, manifest, error: result.err() })
}

/// Entry point of the `barriertop` binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let Some(path) = cli.flags.config.clone() else {
        eprintln!("error: --config <PATH> is required");
        return ExitCode::from(2);
    };
    let outcome = load_config(&path, &cli.flags).and_then(|c| run(cli.command, &c, cli.flags.oracle));
    match outcome {
        Ok(RunOutcome { manifest_path, error: None, manifest }) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}: {} artifacts, manifest {}", manifest.command, manifest.artifacts.len(), manifest_path.display());
            ExitCode::SUCCESS
        }
        Ok(RunOutcome { manifest_path, error: Some(e), manifest }) => {
            eprintln!("error: {}", manifest.failure.as_deref().unwrap_or(&e.to_string()));
            eprintln!("partial results recorded in {}", manifest_path.display());
            ExitCode::from(exit_code(&e))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
