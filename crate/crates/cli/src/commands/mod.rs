//! The six subcommands. Each turns a validated [`RunConfig`] into [`Artifacts`].

mod analyze;
mod horseshoe;
mod knot;
mod orbits;
mod persist;
mod scan;

pub use analyze::analyze;
pub use horseshoe::verify_horseshoe;
pub use knot::knot;
pub use orbits::orbits;
pub use persist::persist;
pub use scan::scan;

use rossler_knots::dynamics::IntegratorConfig;
use rossler_knots::knot::ProjectOptions;
use rossler_knots::symbolic::{
    attractor_returns, calibrate_from_pairs, orbit_integrator, PartitionModel, SymbolWord,
};
use rossler_knots::section::SectionPoint;
use rossler_knots::Execution;

use crate::config::RunConfig;
use crate::report::Artifacts;
use crate::CliError;

/// Command-specific keys, on top of [`crate::config::COMMON_KEYS`].
pub fn extra_keys(command: &str) -> &'static [&'static str] {
    match command {
        "scan" => &[
            "x_axis",
            "y_axis",
            "x_min",
            "x_max",
            "nx",
            "y_min",
            "y_max",
            "ny",
            "refine",
            "refine_tol",
            "refine_max",
            "refine_iter",
        ],
        "orbits" => &["words", "max_length", "returns", "transient", "orbit_tol"],
        "knot" => &["input", "curve", "hint", "radius"],
        "verify-horseshoe" => &[
            "mode",
            "variant",
            "max_length",
            "samples_per_edge",
            "gap",
            "returns",
            "transient",
        ],
        "persist" => &[
            "input",
            "word",
            "direction",
            "schedule",
            "returns",
            "transient",
            "orbit_tol",
        ],
        _ => &[],
    }
}

pub fn dispatch(command: &str, cfg: &RunConfig) -> Result<Artifacts, CliError> {
    match command {
        "analyze" => analyze(cfg),
        "scan" => scan(cfg),
        "orbits" => orbits(cfg),
        "knot" => knot(cfg),
        "verify-horseshoe" => verify_horseshoe(cfg),
        "persist" => persist(cfg),
        other => Err(CliError::Config(format!("unknown command {other}"))),
    }
}

pub(crate) fn project_options(cfg: &RunConfig, hint: [f64; 3]) -> ProjectOptions {
    ProjectOptions {
        hint,
        seed: cfg.seed,
        exec: Execution::default(),
        ..ProjectOptions::default()
    }
}

/// Integrator settings for periodic-orbit work; `orbit_tol` replaces the default tolerance.
pub(crate) fn orbit_config(cfg: &RunConfig) -> Result<IntegratorConfig, CliError> {
    let mut icfg = orbit_integrator();
    icfg.escape_radius = cfg.integrator.escape_radius;
    icfg.tol = cfg.f64_or("orbit_tol", icfg.tol)?;
    icfg.validate().map_err(|e| CliError::Config(format!("orbit_tol: {e}")))?;
    Ok(icfg)
}

pub(crate) fn parse_word(s: &str) -> Result<SymbolWord, CliError> {
    let w = SymbolWord::parse(s.trim()).map_err(|e| CliError::Config(format!("word {s:?}: {e}")))?;
    w.require_minimal()
        .map_err(|e| CliError::Config(format!("word {s:?}: {e}")))?;
    Ok(w)
}

/// Attractor returns and the fold partition calibrated from them.
pub(crate) struct SymbolicSetup {
    pub returns: Vec<SectionPoint>,
    pub model: PartitionModel,
}

pub(crate) fn symbolic_setup(cfg: &RunConfig) -> Result<SymbolicSetup, CliError> {
    let n = cfg.usize_or("returns", 3000)?;
    let transient = cfg.f64_or("transient", 300.0)?;
    if n < 2 || !(transient >= 0.0) {
        return Err(CliError::Config("returns must be at least 2 and transient non-negative".into()));
    }
    let icfg = orbit_config(cfg)?;
    let returns = attractor_returns(&cfg.params, n, transient, &icfg)
        .map_err(|e| CliError::Numerical(format!("attractor sequence: {e}")))?;
    let pairs: Vec<(f64, f64)> = returns.windows(2).map(|w| (w[0].u, w[1].u)).collect();
    let model = calibrate_from_pairs(&pairs)
        .map_err(|e| CliError::Numerical(format!("fold partition: {e}")))?;
    Ok(SymbolicSetup { returns, model })
}
