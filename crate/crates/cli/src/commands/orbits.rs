use rossler_knots::knot::{Certificate, PolygonalKnot, Provenance};
use rossler_knots::symbolic::{
    circle_loop, close_return_seeds, find_periodic_orbit, fixed_point_index, lyndon_words,
    IndexOptions, OrbitOptions, OrbitStatus, PeriodicOrbit, ReturnMap, SymbolWord,
};
use rossler_knots::Execution;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{orbit_config, parse_word, project_options, symbolic_setup};
use crate::config::RunConfig;
use crate::report::{csv_f64, csv_str, to_value, Artifacts, Csv, Report};
use crate::CliError;

/// Seeds tried per word, closest recurrences first.
pub const SEEDS_PER_WORD: usize = 5;
/// Largest index loop radius around an orbit point.
pub const INDEX_RADIUS: f64 = 1e-3;

/// One entry of the `orbits` array in an orbits report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub word: String,
    /// `verified`, `wrong_itinerary`, `degenerate` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub orbit: Option<PeriodicOrbit>,
    pub index: Option<i64>,
    pub index_error: Option<String>,
    pub certificate: Option<Certificate>,
}

pub(crate) fn status_label(s: OrbitStatus) -> &'static str {
    match s {
        OrbitStatus::Verified => "verified",
        OrbitStatus::WrongItinerary => "wrong_itinerary",
        OrbitStatus::Degenerate => "degenerate",
    }
}

pub(crate) fn orbit_index(orbit: &PeriodicOrbit, opts: &OrbitOptions) -> Result<i64, String> {
    let map = ReturnMap {
        p: orbit.params,
        t_max: opts.t_max,
        cfg: opts.cfg,
    };
    let r = (0.25 * orbit.min_separation).min(INDEX_RADIUS);
    let lp = circle_loop(orbit.points[0], r, 16);
    let io = IndexOptions {
        noise_floor: 1e-10,
        ..IndexOptions::default()
    };
    fixed_point_index(&map, &lp, orbit.points.len(), &io)
        .map(|r| r.index)
        .map_err(|e| e.to_string())
}

pub(crate) fn orbit_options(cfg: &RunConfig) -> Result<OrbitOptions, CliError> {
    Ok(OrbitOptions {
        cfg: orbit_config(cfg)?,
        t_max: cfg.t_max,
        ..OrbitOptions::default()
    })
}

fn word_list(cfg: &RunConfig) -> Result<Vec<SymbolWord>, CliError> {
    match cfg.get("words") {
        Some(list) => {
            let words: Vec<SymbolWord> = list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(parse_word)
                .collect::<Result<_, _>>()?;
            Ok(words)
        }
        None => {
            let n = cfg.usize_or("max_length", 4)?;
            if n > 12 {
                return Err(CliError::Config("max_length is limited to 12".into()));
            }
            Ok((1..=n).flat_map(lyndon_words).collect())
        }
    }
}

pub fn orbits(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let words = word_list(cfg)?;
    let opts = orbit_options(cfg)?;
    let setup = symbolic_setup(cfg)?;
    let project = project_options(cfg, [0.0, 0.0, 1.0]);
    let p = cfg.params;
    let records: Vec<OrbitRecord> = Execution::default().map(&words, |word| {
        let seeds = close_return_seeds(&setup.returns, word, &setup.model, SEEDS_PER_WORD);
        let mut rec = OrbitRecord {
            word: word.to_string(),
            status: "failed".into(),
            error: None,
            orbit: None,
            index: None,
            index_error: None,
            certificate: None,
        };
        match find_periodic_orbit(&p, word, &seeds, &setup.model, &opts) {
            Ok(o) => {
                rec.status = status_label(o.status).into();
                match orbit_index(&o, &opts) {
                    Ok(i) => rec.index = Some(i),
                    Err(e) => rec.index_error = Some(e),
                }
                match PolygonalKnot::new(o.curve.clone(), Provenance::Orbit(rec.word.clone()))
                    .and_then(|k| Certificate::of_knot(&k, &project))
                {
                    Ok(c) => rec.certificate = Some(c),
                    Err(e) => rec.error = Some(format!("knot certificate: {e}")),
                }
                rec.orbit = Some(o);
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    });

    let mut csv = Csv::new(&[
        "word",
        "status",
        "period",
        "residual",
        "iterations",
        "multiplier_1_re",
        "multiplier_1_im",
        "multiplier_2_re",
        "multiplier_2_im",
        "unstable",
        "index",
        "knot_class",
        "polynomial",
        "crossings",
    ]);
    for r in &records {
        let o = r.orbit.as_ref();
        let m = o.map(|o| o.multipliers).unwrap_or([[f64::NAN; 2]; 2]);
        let c = r.certificate.as_ref();
        csv.push(vec![
            r.word.clone(),
            r.status.clone(),
            csv_f64(o.map_or(f64::NAN, |o| o.period)),
            csv_f64(o.map_or(f64::NAN, |o| o.residual)),
            o.map_or(String::new(), |o| o.iterations.to_string()),
            csv_f64(m[0][0]),
            csv_f64(m[0][1]),
            csv_f64(m[1][0]),
            csv_f64(m[1][1]),
            o.map_or(String::new(), |o| o.unstable_count().to_string()),
            r.index.map_or(String::new(), |i| i.to_string()),
            csv_str(c.map_or("", |c| c.label.as_str())),
            csv_str(c.map_or("", |c| c.polynomial.as_str())),
            c.map_or(String::new(), |c| c.crossings_reduced.to_string()),
        ]);
    }
    let verified = records.iter().filter(|r| r.status == "verified").count();
    let results = json!({
        "partition": to_value(&setup.model),
        "returns": setup.returns.len(),
        "orbit_options": to_value(&opts),
        "words": records.len(),
        "verified": verified,
        "orbits": to_value(&records),
    });
    let mut art = Artifacts::report(Report::new("orbits", cfg, results, Vec::new()));
    art.csv = Some(csv);
    Ok(art)
}
