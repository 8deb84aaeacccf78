use rossler_knots::symbolic::{
    circle_loop, fixed_point_index, horseshoe_rectangle, lyndon_words, necklace_count,
    verify_topological_horseshoe, AffineHorseshoe, HorseshoeReport, IndexOptions, PlanarMap,
    Point, ReturnMap, SymbolWord,
};
use serde::Serialize;
use serde_json::json;

use super::{orbit_config, symbolic_setup};
use crate::config::RunConfig;
use crate::report::{to_value, Artifacts, Report};
use crate::CliError;

/// Two periodic points closer than this are the same point.
const SAME_POINT: f64 = 1e-9;

/// Periodic-point census of the affine horseshoe for one length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthCensus {
    pub length: usize,
    /// Primitive binary necklaces of this length, counted by enumerating all words.
    pub brute_force: usize,
    pub necklace_formula: usize,
    pub lyndon_words: usize,
    /// Distinct solutions of `f^n(x) = x` over all `2^n` itineraries.
    pub fixed_points: usize,
    /// Orbits of minimal period `n` among them.
    pub orbits: usize,
    pub itinerary_mismatches: usize,
    pub indices: Vec<i64>,
    pub index_errors: Vec<String>,
}

/// Counts primitive binary necklaces of length `n` by checking every word against its
/// rotations.
pub fn brute_force_necklaces(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    (0u64..1 << n)
        .filter(|&bits| {
            let w: Vec<u64> = (0..n).map(|i| (bits >> (n - 1 - i)) & 1).collect();
            (1..n).all(|r| {
                let rot: Vec<u64> = (0..n).map(|i| w[(i + r) % n]).collect();
                rot > w
            })
        })
        .count()
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn census(map: &AffineHorseshoe, n: usize) -> LengthCensus {
    let mut points: Vec<(Point, Vec<u8>)> = Vec::new();
    let mut mismatches = 0;
    for bits in 0u64..1 << n {
        let symbols: Vec<u8> = (0..n).map(|i| 1 + ((bits >> (n - 1 - i)) & 1) as u8).collect();
        let Ok(word) = SymbolWord::new(symbols.clone()) else { continue };
        let Ok(sol) = map.periodic_orbit(&word) else { continue };
        let x = sol.points[0];
        if map.itinerary(x, n).as_deref() != Some(&symbols[..]) {
            mismatches += 1;
        }
        if points.iter().all(|(q, _)| dist(*q, x) > SAME_POINT) {
            points.push((x, symbols));
        }
    }
    let minimal: Vec<&(Point, Vec<u8>)> = points
        .iter()
        .filter(|(x, _)| {
            (1..n)
                .filter(|d| n.is_multiple_of(*d))
                .all(|d| map.iterate(*x, d).is_none_or(|y| dist(y, *x) > SAME_POINT))
        })
        .collect();
    let r = 0.05 * 3f64.powi(-(n as i32));
    let opts = IndexOptions::default();
    let mut indices = Vec::new();
    let mut errors = Vec::new();
    for (x, _) in &minimal {
        match fixed_point_index(map, &circle_loop(*x, r, 16), n, &opts) {
            Ok(res) => indices.push(res.index),
            Err(e) => errors.push(e.to_string()),
        }
    }
    LengthCensus {
        length: n,
        brute_force: brute_force_necklaces(n),
        necklace_formula: necklace_count(n),
        lyndon_words: lyndon_words(n).len(),
        fixed_points: points.len(),
        orbits: minimal.len() / n,
        itinerary_mismatches: mismatches,
        indices,
        index_errors: errors,
    }
}

fn condition_notes(rep: &HorseshoeReport, out: &mut Vec<String>) {
    if !rep.valid {
        out.push(format!(
            "{} of {} probes failed to evaluate; the check is inconclusive",
            rep.failures, rep.probes
        ));
    }
    if !rep.condition_i {
        out.push("strip images do not cross the rectangle".into());
    }
    if !rep.condition_ii {
        out.push("strip images do not meet both strips".into());
    }
}

pub fn verify_horseshoe(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let samples = cfg.usize_or("samples_per_edge", 500)?;
    let mut diagnostics = Vec::new();
    let results = match cfg.get("mode").unwrap_or("synthetic") {
        "synthetic" => {
            let map = match cfg.get("variant").unwrap_or("orientation_preserving") {
                "orientation_preserving" => AffineHorseshoe::orientation_preserving(),
                "folded" => AffineHorseshoe::folded(),
                v => return Err(CliError::Config(format!("variant: unknown {v:?}"))),
            };
            let max_len = cfg.usize_or("max_length", 6)?;
            if max_len > 14 {
                return Err(CliError::Config("max_length is limited to 14".into()));
            }
            let rep = verify_topological_horseshoe(
                &map,
                &AffineHorseshoe::rectangle(),
                &AffineHorseshoe::strips(),
                samples,
            );
            condition_notes(&rep, &mut diagnostics);
            let census: Vec<LengthCensus> = (1..=max_len).map(|n| census(&map, n)).collect();
            for c in &census {
                if c.orbits != c.brute_force {
                    diagnostics.push(format!(
                        "length {}: {} orbits found, {} expected",
                        c.length, c.orbits, c.brute_force
                    ));
                }
                if c.itinerary_mismatches > 0 || !c.index_errors.is_empty() {
                    diagnostics.push(format!("length {}: itinerary or index failures", c.length));
                }
            }
            let indices: Vec<i64> = census.iter().flat_map(|c| c.indices.iter().copied()).collect();
            json!({
                "mode": "synthetic",
                "variant": format!("{:?}", map.kind),
                "horseshoe": to_value(&rep),
                "census": to_value(&census),
                "all_index_minus_one": !indices.is_empty() && indices.iter().all(|&i| i == -1),
            })
        }
        "rossler" => {
            let gap = cfg.f64_or("gap", 0.02)?;
            if !(0.0..0.5).contains(&gap) {
                return Err(CliError::Config("gap must lie in [0, 0.5)".into()));
            }
            let setup = symbolic_setup(cfg)?;
            let (rect, strips) = horseshoe_rectangle(&setup.returns, &setup.model, gap)
                .ok_or_else(|| CliError::Numerical("fold lies outside the attractor's u-range".into()))?;
            let map = ReturnMap {
                p: cfg.params,
                t_max: cfg.t_max,
                cfg: orbit_config(cfg)?,
            };
            let rep = verify_topological_horseshoe(&map, &rect, &strips, samples);
            condition_notes(&rep, &mut diagnostics);
            json!({
                "mode": "rossler",
                "partition": to_value(&setup.model),
                "returns": setup.returns.len(),
                "gap": gap,
                "horseshoe": to_value(&rep),
            })
        }
        m => return Err(CliError::Config(format!("mode: unknown {m:?}"))),
    };
    Ok(Artifacts::report(Report::new("verify-horseshoe", cfg, results, diagnostics)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn necklace_oracle() {
        let counts: Vec<usize> = (1..=6).map(brute_force_necklaces).collect();
        assert_eq!(counts, vec![2, 1, 2, 3, 6, 9]);
    }

    #[test]
    fn census_matches_oracle() {
        let map = AffineHorseshoe::orientation_preserving();
        for n in 1..=4 {
            let c = census(&map, n);
            assert_eq!(c.orbits, c.brute_force);
            assert_eq!(c.fixed_points, 1 << n);
            assert!(c.indices.iter().all(|&i| i == -1));
        }
    }
}
