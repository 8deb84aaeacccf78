use std::path::Path;

use rossler_knots::knot::{
    braid_to_knot, lorenz_word_to_braid, project, Certificate, PolygonalKnot, Provenance,
};
use rossler_knots::manifolds::{
    attractor_radius, build_lambda_knot, heteroclinic_mismatch, LambdaOptions, MismatchOptions,
    CLOSURE_FACTOR,
};
use serde_json::{json, Value};

use super::orbits::OrbitRecord;
use super::{parse_word, project_options};
use crate::config::RunConfig;
use crate::report::{to_value, Artifacts, Report};
use crate::svg::{emit_svg, SvgStyle};
use crate::CliError;

pub(crate) fn parse_hint(cfg: &RunConfig) -> Result<[f64; 3], CliError> {
    match cfg.f64_list("hint")? {
        None => Ok([0.0, 0.0, 1.0]),
        Some(v) if v.len() == 3 && v.iter().any(|x| *x != 0.0) => Ok([v[0], v[1], v[2]]),
        Some(_) => Err(CliError::Config("hint: expected three numbers, not all zero".into())),
    }
}

/// Looks up the orbit record for `word` in an orbits report.
pub(crate) fn orbit_from_report(path: &Path, word: &str) -> Result<OrbitRecord, CliError> {
    let report = Report::read(path)?;
    if report.command != "orbits" {
        return Err(CliError::Config(format!(
            "{} is a {} report, expected orbits",
            path.display(),
            report.command
        )));
    }
    let records: Vec<OrbitRecord> = serde_json::from_value(report.results["orbits"].clone())
        .map_err(|e| CliError::Config(format!("{}: malformed orbits: {e}", path.display())))?;
    records
        .into_iter()
        .find(|r| r.word == word)
        .ok_or_else(|| CliError::Config(format!("{} has no orbit {word}", path.display())))
}

fn lambda_curve(cfg: &RunConfig) -> Result<(PolygonalKnot, Value), CliError> {
    let p = cfg.params;
    let mopts = MismatchOptions {
        h: cfg.h,
        t_max: cfg.t_max,
        cfg: cfg.integrator,
        pairing: None,
        trapping: false,
    };
    let diag = heteroclinic_mismatch(&p, &mopts)
        .map_err(|e| CliError::Numerical(format!("heteroclinic mismatch: {e}")))?;
    let radius = match cfg.get("radius") {
        Some(_) => cfg.f64_or("radius", 0.0)?,
        None => {
            CLOSURE_FACTOR
                * attractor_radius(&p, &cfg.integrator)
                    .ok_or_else(|| CliError::Numerical("no bounded attractor for the closure radius".into()))?
        }
    };
    if !(radius > 0.0) {
        return Err(CliError::Config("radius must be positive".into()));
    }
    let lopts = LambdaOptions {
        h: cfg.h,
        t_max: cfg.t_max,
        cfg: cfg.integrator,
        ..LambdaOptions::default()
    };
    let lk = build_lambda_knot(&p, &diag, radius, &lopts)
        .map_err(|e| CliError::Numerical(format!("closing Λ: {e}")))?;
    let knot = lk
        .knot()
        .map_err(|e| CliError::Numerical(format!("Λ polygon: {e}")))?;
    let extra = json!({
        "radius": radius,
        "mismatch_norm": diag.mismatch_norm,
        "pairing": diag.pairing.label(),
        "n_u": diag.n_u,
        "n_l": diag.n_l,
        "closure": to_value(&lk.closure),
        "pieces": to_value(&lk.pieces),
        "theta_gap": lk.theta_gap,
    });
    Ok((knot, extra))
}

pub fn knot(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let spec = cfg
        .get("curve")
        .ok_or_else(|| CliError::Config("curve is required: orbit:WORD, lambda or template:WORD".into()))?;
    let hint = parse_hint(cfg)?;
    let (knot, extra) = if let Some(w) = spec.strip_prefix("orbit:") {
        let path = cfg
            .get("input")
            .ok_or_else(|| CliError::Config("curve orbit:WORD needs input = <orbits report>".into()))?;
        let word = parse_word(w)?.to_string();
        let rec = orbit_from_report(Path::new(path), &word)?;
        let orbit = rec
            .orbit
            .ok_or_else(|| CliError::Config(format!("orbit {word} has no solution in {path}")))?;
        let k = PolygonalKnot::new(orbit.curve.clone(), Provenance::Orbit(word.clone()))
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        (k, json!({"word": word, "status": rec.status, "period": orbit.period}))
    } else if let Some(w) = spec.strip_prefix("template:") {
        let word = parse_word(w)?;
        let lb = lorenz_word_to_braid(&word).map_err(|e| CliError::Config(e.to_string()))?;
        let k = braid_to_knot(&lb.braid).map_err(|e| CliError::Numerical(e.to_string()))?;
        (k, json!({"word": word.to_string(), "braid": lb.braid.to_string(), "strands": word.len()}))
    } else if spec == "lambda" {
        lambda_curve(cfg)?
    } else {
        return Err(CliError::Config(format!("curve: unknown kind {spec:?}")));
    };
    let popts = project_options(cfg, hint);
    let diagram = project(&knot, &popts).map_err(|e| CliError::Numerical(format!("projection: {e}")))?;
    let reduced = diagram.simplify();
    let cert = Certificate::from_code(&reduced.code, diagram.crossing_count(), diagram.direction)
        .map_err(|e| CliError::Numerical(format!("Alexander polynomial: {e}")))?;
    let svg = emit_svg(&knot, &diagram, &SvgStyle::default());
    let results = json!({
        "curve": spec,
        "source": extra,
        "vertices": knot.vertices(),
        "diagram": {
            "direction": diagram.direction,
            "basis": diagram.basis,
            "attempts": diagram.attempts,
            "crossings": diagram.crossing_count(),
            "writhe": diagram.writhe(),
            "reduced_crossings": reduced.crossing_count(),
            "reduced_writhe": reduced.writhe(),
        },
        "certificate": to_value(&cert),
    });
    let mut art = Artifacts::report(Report::new("knot", cfg, results, Vec::new()));
    art.svg = Some(svg);
    Ok(art)
}
