use std::path::Path;

use rossler_knots::symbolic::{
    close_return_seeds, find_periodic_orbit, persistence_check, IndexOptions, PartitionModel,
    PersistenceOptions,
};
use serde_json::json;

use super::knot::orbit_from_report;
use super::orbits::{orbit_options, SEEDS_PER_WORD};
use super::{parse_word, project_options, symbolic_setup};
use crate::config::RunConfig;
use crate::report::{to_value, Artifacts, Report};
use crate::CliError;

fn schedule(cfg: &RunConfig) -> Result<Vec<[f64; 3]>, CliError> {
    let dir = cfg.f64_list("direction")?.unwrap_or(vec![0.3, 0.4, 0.866]);
    if dir.len() != 3 {
        return Err(CliError::Config("direction: expected three numbers".into()));
    }
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if !(n > 0.0) {
        return Err(CliError::Config("direction must be non-zero".into()));
    }
    let norms = cfg.f64_list("schedule")?.unwrap_or(vec![1e-6, 1e-5, 1e-4]);
    if norms.iter().any(|s| !(*s > 0.0)) {
        return Err(CliError::Config("schedule: offsets must be positive".into()));
    }
    Ok(norms
        .iter()
        .map(|s| [s * dir[0] / n, s * dir[1] / n, s * dir[2] / n])
        .collect())
}

/// Continues one orbit along `direction`, scaled to each norm in `schedule`, and compares
/// index and knot certificate with the base orbit.
pub fn persist(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let word = parse_word(
        cfg.get("word")
            .ok_or_else(|| CliError::Config("word is required".into()))?,
    )?;
    let sched = schedule(cfg)?;
    let opts = orbit_options(cfg)?;
    let (orbit, model): (_, PartitionModel) = match cfg.get("input") {
        Some(path) => {
            let path = Path::new(path);
            let rec = orbit_from_report(path, &word.to_string())?;
            let orbit = rec
                .orbit
                .ok_or_else(|| CliError::Config(format!("orbit {word} has no solution in {}", path.display())))?;
            let report = Report::read(path)?;
            let model = serde_json::from_value(report.results["partition"].clone())
                .map_err(|e| CliError::Config(format!("{}: malformed partition: {e}", path.display())))?;
            (orbit, model)
        }
        None => {
            let setup = symbolic_setup(cfg)?;
            let seeds = close_return_seeds(&setup.returns, &word, &setup.model, SEEDS_PER_WORD);
            let orbit = find_periodic_orbit(&cfg.params, &word, &seeds, &setup.model, &opts)
                .map_err(|e| CliError::Numerical(format!("orbit {word}: {e}")))?;
            (orbit, setup.model)
        }
    };
    let popts = PersistenceOptions {
        orbit: opts,
        index: IndexOptions {
            noise_floor: 1e-10,
            ..IndexOptions::default()
        },
        project: project_options(cfg, [0.0, 0.0, 1.0]),
        ..PersistenceOptions::default()
    };
    let rep = persistence_check(&orbit, &model, &sched, &popts);
    let mut diagnostics = Vec::new();
    if !orbit.is_verified() {
        diagnostics.push(format!("base orbit status is {:?}", orbit.status));
    }
    if let Some(f) = &rep.failure {
        diagnostics.push(format!("continuation stopped: {}", f.reason));
    }
    if !rep.preserved {
        diagnostics.push("index or knot certificate changed along the schedule".into());
    }
    let results = json!({
        "word": word.to_string(),
        "schedule": sched,
        "base_orbit": {
            "status": format!("{:?}", orbit.status),
            "period": orbit.period,
            "residual": orbit.residual,
            "points": orbit.points,
        },
        "persistence": to_value(&rep),
    });
    Ok(Artifacts::report(Report::new("persist", cfg, results, diagnostics)))
}
