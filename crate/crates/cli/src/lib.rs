//! Batch front end: six subcommands that read a `key = value` config, run one analysis and
//! write JSON, CSV and SVG artifacts.
//!
//! Exit codes: `0` success (also when a report records failed diagnostics), `2` configuration
//! error, `3` numerical or I/O failure that left no output.

pub mod commands;
pub mod config;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;
pub use report::Report;

pub const THREADS_ENV: &str = "ROSSLER_KNOTS_THREADS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rossler-knots", version, about = "Knot types and symbolic dynamics of the Rössler flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed points, spectra and assumption verdicts.
    Analyze(CommonArgs),
    /// Heteroclinic mismatch over a two-parameter grid.
    Scan(CommonArgs),
    /// Periodic orbits by symbol word.
    Orbits(CommonArgs),
    /// Knot certificate and diagram of an orbit, of Λ, or of a template word.
    Knot(CommonArgs),
    /// Topological horseshoe check, synthetic or on the return map.
    VerifyHorseshoe(CommonArgs),
    /// Fixed-point index and knot type along a parameter schedule.
    Persist(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Scan(_) => "scan",
            Command::Orbits(_) => "orbits",
            Command::Knot(_) => "knot",
            Command::VerifyHorseshoe(_) => "verify-horseshoe",
            Command::Persist(_) => "persist",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Analyze(a)
            | Command::Scan(a)
            | Command::Orbits(a)
            | Command::Knot(a)
            | Command::VerifyHorseshoe(a)
            | Command::Persist(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Configuration file with one `key = value` per line.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Integrator tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Thread count from [`THREADS_ENV`]; `0` or unset means automatic.
pub fn thread_setting() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}: not a non-negative integer: {v}"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(CliError::Config(format!("{THREADS_ENV}: {e}"))),
    }
}

fn init_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        // the global pool can only be set once per process; later calls keep the first setting
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Merges the config file and flag overrides, then validates against the command's keys.
fn load_config(cmd: &Command) -> Result<(RunConfig, PathBuf), CliError> {
    let args = cmd.args();
    let mut entries = match &args.config {
        Some(path) => config::read_entries(path)?,
        None => Default::default(),
    };
    for (k, v) in [("a", args.a), ("b", args.b), ("c", args.c), ("tol", args.tol)] {
        if let Some(v) = v {
            entries.insert(k.to_string(), v.to_string());
        }
    }
    if let Some(s) = args.seed {
        entries.insert("seed".into(), s.to_string());
    }
    let out_entry = entries.remove("out").map(PathBuf::from);
    let out = args
        .out
        .clone()
        .or(out_entry)
        .unwrap_or_else(|| PathBuf::from("."));
    let extra = commands::extra_keys(cmd.name());
    Ok((RunConfig::new(entries, extra)?, out))
}

pub fn execute(cmd: &Command) -> Result<Vec<PathBuf>, CliError> {
    let threads = thread_setting()?;
    init_threads(threads);
    let (cfg, out) = load_config(cmd)?;
    let artifacts = commands::dispatch(cmd.name(), &cfg)?;
    artifacts.write(&out, cmd.name())
}

/// Parses `args` (program name first), runs the command, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_to(args, &mut std::io::stdout())
}

/// [`run`] with the list of written paths sent to `out`.
pub fn run_to<I, T>(args: I, out: &mut dyn Write) -> i32
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
    match execute(&cli.command) {
        Ok(paths) => {
            for p in paths {
                let _ = writeln!(out, "{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
