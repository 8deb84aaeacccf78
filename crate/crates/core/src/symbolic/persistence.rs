use serde::{Deserialize, Serialize};

use crate::knot::{Certificate, PolygonalKnot, ProjectOptions, Provenance};
use crate::Params;

use super::index::{fixed_point_index, IndexOptions};
use super::orbit::{finish_orbit, OrbitOptions, PeriodicOrbit, ReturnMap};
use super::partition::PartitionModel;
use super::planar::{ellipse_loop, Point};
use super::shooting::solve_periodic;

/// Smallest parameter increment tried before continuation gives up.
pub const DELTA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct PersistenceOptions {
    pub orbit: OrbitOptions,
    pub index: IndexOptions,
    pub project: ProjectOptions,
    pub loop_vertices: usize,
    /// Loop radius as a multiple of the largest orbit-point drift over the schedule.
    pub drift_factor: f64,
    /// Radius floor, relative to `1 + |x|`.
    pub min_radius: f64,
    pub max_attempts: usize,
}

impl Default for PersistenceOptions {
    fn default() -> Self {
        PersistenceOptions {
            orbit: OrbitOptions::default(),
            index: IndexOptions {
                noise_floor: 1e-10,
                ..IndexOptions::default()
            },
            project: ProjectOptions::default(),
            loop_vertices: 16,
            drift_factor: 4.0,
            min_radius: 1e-6,
            max_attempts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceStep {
    pub delta: [f64; 3],
    pub delta_norm: f64,
    pub params: Params,
    pub residual: f64,
    pub iterations: usize,
    pub point: Point,
    /// Distance of the continued orbit point from the base point.
    pub drift: f64,
    pub index: Option<i64>,
    pub index_error: Option<String>,
    pub alexander: Option<String>,
    pub knot_class: Option<String>,
    pub index_preserved: bool,
    pub certificate_preserved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationFailure {
    pub target: [f64; 3],
    pub last_good_norm: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub word: String,
    pub base: Params,
    pub loop_center: Point,
    pub loop_radii: [f64; 2],
    pub base_index: Option<i64>,
    pub base_index_error: Option<String>,
    pub base_alexander: Option<String>,
    pub base_knot_class: Option<String>,
    pub steps: Vec<PersistenceStep>,
    pub failure: Option<ContinuationFailure>,
    /// Every accepted step kept the base index and the base polynomial.
    pub preserved: bool,
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn add(p: &Params, d: [f64; 3]) -> Option<Params> {
    Params::new(p.a + d[0], p.b + d[1], p.c + d[2]).ok()
}

fn certificate(orbit: &PeriodicOrbit, opts: &ProjectOptions) -> (Option<String>, Option<String>, Option<Certificate>) {
    let cert = PolygonalKnot::new(orbit.curve.clone(), Provenance::Orbit(orbit.word.to_string()))
        .and_then(|k| Certificate::of_knot(&k, opts));
    match cert {
        Ok(c) => (Some(c.polynomial.to_string()), Some(c.label.clone()), Some(c)),
        Err(_) => (None, None, None),
    }
}

/// Continues `orbit` along the cumulative offsets in `schedule` and compares the fixed-point
/// index and the Alexander certificate with those at the base parameters.
///
/// Each target is approached from the last accepted parameters; a failed step is halved
/// until it succeeds or drops below [`DELTA_FLOOR`].
pub fn persistence_check(
    orbit: &PeriodicOrbit,
    model: &PartitionModel,
    schedule: &[[f64; 3]],
    opts: &PersistenceOptions,
) -> PersistenceReport {
    let base = orbit.params;
    let k = orbit.points.len();
    let mut accepted: Vec<(PeriodicOrbit, [f64; 3])> = Vec::new();
    let mut failure = None;
    let mut current = orbit.clone();
    let mut cur_delta = [0.0; 3];
    let mut attempts = 0usize;
    'targets: for &target in schedule {
        loop {
            let rem = [
                target[0] - cur_delta[0],
                target[1] - cur_delta[1],
                target[2] - cur_delta[2],
            ];
            if norm3(rem) == 0.0 {
                accepted.push((current.clone(), cur_delta));
                continue 'targets;
            }
            let mut step = rem;
            let mut last_reason = String::new();
            let next = loop {
                attempts += 1;
                let d = if step == rem {
                    target
                } else {
                    [cur_delta[0] + step[0], cur_delta[1] + step[1], cur_delta[2] + step[2]]
                };
                let outcome = add(&base, d).ok_or_else(|| "parameters out of domain".to_string()).and_then(|p| {
                    let map = ReturnMap {
                        p,
                        t_max: opts.orbit.t_max,
                        cfg: opts.orbit.cfg,
                    };
                    let sol = solve_periodic(&map, &current.points, &opts.orbit.shooting)
                        .map_err(|e| e.to_string())?;
                    let o = finish_orbit(&p, &orbit.word, &sol, model, &opts.orbit)
                        .map_err(|e| e.to_string())?;
                    if o.is_verified() {
                        Ok(o)
                    } else {
                        Err(format!("itinerary changed to {:?}", o.observed))
                    }
                });
                match outcome {
                    Ok(o) => break Some((o, d)),
                    Err(r) => last_reason = r,
                }
                step = [0.5 * step[0], 0.5 * step[1], 0.5 * step[2]];
                if norm3(step) < DELTA_FLOOR || attempts >= opts.max_attempts {
                    break None;
                }
            };
            match next {
                Some((o, d)) => {
                    current = o;
                    cur_delta = d;
                    if d == target {
                        accepted.push((current.clone(), cur_delta));
                        continue 'targets;
                    }
                }
                None => {
                    failure = Some(ContinuationFailure {
                        target,
                        last_good_norm: norm3(cur_delta),
                        reason: last_reason,
                    });
                    break 'targets;
                }
            }
        }
    }

    // one loop for the whole homotopy: around the base point, wide enough for every drift
    let x0 = orbit.points[0];
    let drift = |x: Point| (x[0] - x0[0]).hypot(x[1] - x0[1]);
    let max_drift = accepted.iter().map(|(o, _)| drift(o.points[0])).fold(0.0, f64::max);
    let floor = opts.min_radius * (1.0 + x0[0].abs().max(x0[1].abs()));
    let cap = if k > 1 { 0.25 * orbit.min_separation } else { f64::INFINITY };
    let r = (opts.drift_factor * max_drift).max(floor).min(cap);
    let loop_pts = ellipse_loop(x0, [r, r], opts.loop_vertices);
    let index_at = |p: &Params| {
        let map = ReturnMap {
            p: *p,
            t_max: opts.orbit.t_max,
            cfg: opts.orbit.cfg,
        };
        fixed_point_index(&map, &loop_pts, k, &opts.index)
    };
    let base_idx = index_at(&base);
    let (base_poly, base_class, base_cert) = certificate(orbit, &opts.project);
    let base_index = base_idx.as_ref().ok().map(|r| r.index);
    let steps: Vec<PersistenceStep> = accepted
        .iter()
        .map(|(o, d)| {
            let idx = index_at(&o.params);
            let (poly, class, cert) = certificate(o, &opts.project);
            let index = idx.as_ref().ok().map(|r| r.index);
            PersistenceStep {
                delta: *d,
                delta_norm: norm3(*d),
                params: o.params,
                residual: o.residual,
                iterations: o.iterations,
                point: o.points[0],
                drift: drift(o.points[0]),
                index,
                index_error: idx.err().map(|e| e.to_string()),
                alexander: poly,
                knot_class: class,
                index_preserved: index.is_some() && index == base_index,
                certificate_preserved: match (&cert, &base_cert) {
                    (Some(a), Some(b)) => a.same_polynomial(b),
                    _ => false,
                },
            }
        })
        .collect();
    let preserved = failure.is_none()
        && base_index.is_some()
        && steps.iter().all(|s| s.index_preserved && s.certificate_preserved);
    PersistenceReport {
        word: orbit.word.to_string(),
        base,
        loop_center: x0,
        loop_radii: [r, r],
        base_index,
        base_index_error: base_idx.err().map(|e| e.to_string()),
        base_alexander: base_poly,
        base_knot_class: base_class,
        steps,
        failure,
        preserved,
    }
}
