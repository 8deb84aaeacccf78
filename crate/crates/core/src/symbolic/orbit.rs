use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{integrate, DynamicsError, IntegratorConfig, State, Termination};
use crate::section::{first_return, next_crossing, SectionError, SectionPoint, Side};
use crate::Params;

use super::partition::PartitionModel;
use super::planar::{PlanarMap, Point};
use super::shooting::{solve_periodic, ShootingError, ShootingOptions, ShootingSolution};
use super::word::{SymbolWord, WordError};

/// Integration settings used for orbit work; tighter than the scanning default.
pub fn orbit_integrator() -> IntegratorConfig {
    IntegratorConfig {
        tol: 1e-12,
        ..IntegratorConfig::default()
    }
}

/// First-return map on `U_p` in `(u, w)` coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ReturnMap {
    pub p: Params,
    pub t_max: f64,
    pub cfg: IntegratorConfig,
}

impl ReturnMap {
    pub fn new(p: Params) -> Self {
        ReturnMap {
            p,
            t_max: 200.0,
            cfg: orbit_integrator(),
        }
    }
}

impl PlanarMap for ReturnMap {
    fn apply(&self, x: Point) -> Option<Point> {
        let q = SectionPoint::new(&self.p, x[0], x[1]);
        first_return(&self.p, &q, self.t_max, &self.cfg)
            .ok()
            .map(|s| s.out_point.coords())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("no seed for word {0}")]
    NoSeed(String),
    #[error("word {word}: no seed converged (best residual {best_residual:e}, last error: {last})")]
    NoConvergence {
        word: String,
        best_residual: f64,
        last: String,
    },
    #[error("seed has {got} points, word has {want}")]
    SeedLength { got: usize, want: usize },
}

impl From<ShootingError> for OrbitError {
    fn from(e: ShootingError) -> Self {
        OrbitError::NoConvergence {
            word: String::new(),
            best_residual: f64::INFINITY,
            last: e.to_string(),
        }
    }
}

/// Successive returns to `U_p` after a transient, starting near `P_In`.
pub fn attractor_returns(
    p: &Params,
    n: usize,
    transient: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<SectionPoint>, OrbitError> {
    let start = State::new(0.1, 0.0, 0.0);
    let tr = integrate(p, start, transient, cfg)?;
    if tr.termination != Termination::TimeLimit {
        return Err(SectionError::Escape { t: tr.end_time() }.into());
    }
    let c = next_crossing(p, tr.end(), Side::Upper, 1e3, cfg)?;
    let mut q = SectionPoint::from_state(p, &c.state);
    let mut out = Vec::with_capacity(n);
    out.push(q);
    while out.len() < n {
        q = first_return(p, &q, 1e3, cfg)?.out_point;
        out.push(q);
    }
    Ok(out)
}

/// Seeds for `word` from near-recurrences of an attractor sequence, closest first.
pub fn close_return_seeds(
    seq: &[SectionPoint],
    word: &SymbolWord,
    model: &PartitionModel,
    max_seeds: usize,
) -> Vec<Vec<Point>> {
    let k = word.len();
    let symbols: Vec<u8> = seq.iter().map(|q| model.symbol(q.u)).collect();
    let mut found: Vec<(f64, usize)> = Vec::new();
    for i in 0..seq.len().saturating_sub(k) {
        if symbols[i..i + k] == *word.symbols() {
            let (a, b) = (seq[i], seq[i + k]);
            found.push(((a.u - b.u).hypot(a.w - b.w), i));
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    found
        .into_iter()
        .take(max_seeds)
        .map(|(_, i)| seq[i..i + k].iter().map(|q| q.coords()).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitStatus {
    Verified,
    /// Newton converged, but the itinerary differs from the requested word.
    WrongItinerary,
    /// Newton converged onto an orbit of smaller period.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub params: Params,
    pub word: SymbolWord,
    pub observed: Vec<u8>,
    pub status: OrbitStatus,
    pub points: Vec<Point>,
    pub return_times: Vec<f64>,
    pub period: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Floquet multipliers of the `k`-fold return map as `(re, im)`.
    pub multipliers: [[f64; 2]; 2],
    pub jacobian_det_product: f64,
    /// Infinite for a single point; written as `null` in JSON.
    #[serde(deserialize_with = "null_as_infinity")]
    pub min_separation: f64,
    /// Largest distance between a point and its `k`-fold return recomputed sequentially.
    pub closure_error: f64,
    /// One period of the flow, sampled uniformly in time, starting at the first section point.
    pub curve: Vec<[f64; 3]>,
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl PeriodicOrbit {
    pub fn is_verified(&self) -> bool {
        self.status == OrbitStatus::Verified
    }

    pub fn multiplier_product(&self) -> f64 {
        let [m0, m1] = self.multipliers;
        m0[0] * m1[0] - m0[1] * m1[1]
    }

    pub fn unstable_count(&self) -> usize {
        self.multipliers
            .iter()
            .filter(|m| m[0].hypot(m[1]) > 1.0)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    pub shooting: ShootingOptions,
    pub cfg: IntegratorConfig,
    pub t_max: f64,
    pub samples_per_return: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            shooting: ShootingOptions::default(),
            cfg: orbit_integrator(),
            t_max: 200.0,
            samples_per_return: 100,
        }
    }
}

fn min_separation(pts: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min((pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]));
        }
    }
    best
}

/// Builds the labelled orbit record from a converged shooting solution.
pub fn finish_orbit(
    p: &Params,
    word: &SymbolWord,
    sol: &ShootingSolution,
    model: &PartitionModel,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit, OrbitError> {
    let k = sol.points.len();
    let mut return_times = Vec::with_capacity(k);
    let mut closure: f64 = 0.0;
    for (i, x) in sol.points.iter().enumerate() {
        let s = first_return(p, &SectionPoint::new(p, x[0], x[1]), opts.t_max, &opts.cfg)?;
        return_times.push(s.return_time);
        let nx = sol.points[(i + 1) % k];
        closure = closure.max((s.out_point.u - nx[0]).hypot(s.out_point.w - nx[1]));
    }
    // sequential k-fold return of the first point
    let map = ReturnMap {
        p: *p,
        t_max: opts.t_max,
        cfg: opts.cfg,
    };
    if let Some(y) = map.iterate(sol.points[0], k) {
        closure = closure.max((y[0] - sol.points[0][0]).hypot(y[1] - sol.points[0][1]));
    }
    let period: f64 = return_times.iter().sum();
    let observed: Vec<u8> = sol.points.iter().map(|x| model.symbol(x[0])).collect();
    let sep = if k > 1 { min_separation(&sol.points) } else { f64::INFINITY };
    let status = if k > 1 && sep < 1e-6 {
        OrbitStatus::Degenerate
    } else if observed != word.symbols() {
        OrbitStatus::WrongItinerary
    } else {
        OrbitStatus::Verified
    };
    let chart = crate::section::SectionChart::new(p);
    let s0 = chart.to_state(sol.points[0][0], sol.points[0][1]);
    let tr = integrate(p, s0, period, &opts.cfg)?;
    let n = (opts.samples_per_return * k).max(64);
    let curve = sample_uniform(&tr, period, n);
    Ok(PeriodicOrbit {
        params: *p,
        word: word.clone(),
        observed,
        status,
        points: sol.points.clone(),
        return_times,
        period,
        residual: sol.residual,
        iterations: sol.iterations,
        multipliers: sol.multipliers.map(|m| [m.re, m.im]),
        jacobian_det_product: sol.det_product(),
        min_separation: sep,
        closure_error: closure,
        curve,
    })
}

fn sample_uniform(tr: &crate::dynamics::Trajectory, period: f64, n: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for i in 0..n {
        let t = period * i as f64 / n as f64;
        while seg + 1 < tr.segments.len() && tr.segments[seg].t1() < t {
            seg += 1;
        }
        let s = if tr.segments.is_empty() {
            tr.start()
        } else {
            tr.segments[seg].at(t)
        };
        out.push([s.x, s.y, s.z]);
    }
    out
}

/// Multiple-shooting solve for the orbit coded by `word`, trying `seeds` in order.
pub fn find_periodic_orbit(
    p: &Params,
    word: &SymbolWord,
    seeds: &[Vec<Point>],
    model: &PartitionModel,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit, OrbitError> {
    word.require_minimal()?;
    if seeds.is_empty() {
        return Err(OrbitError::NoSeed(word.to_string()));
    }
    let map = ReturnMap {
        p: *p,
        t_max: opts.t_max,
        cfg: opts.cfg,
    };
    let mut best = f64::INFINITY;
    let mut last = String::new();
    let mut fallback: Option<PeriodicOrbit> = None;
    for seed in seeds {
        if seed.len() != word.len() {
            return Err(OrbitError::SeedLength {
                got: seed.len(),
                want: word.len(),
            });
        }
        match solve_periodic(&map, seed, &opts.shooting) {
            Ok(sol) => {
                let orbit = finish_orbit(p, word, &sol, model, opts)?;
                if orbit.is_verified() {
                    return Ok(orbit);
                }
                fallback.get_or_insert(orbit);
            }
            Err(e) => {
                if let ShootingError::NoConvergence { residual, .. } = e {
                    best = best.min(residual);
                }
                last = e.to_string();
            }
        }
    }
    fallback.ok_or(OrbitError::NoConvergence {
        word: word.to_string(),
        best_residual: best,
        last,
    })
}

fn quantile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).round() as usize]
}

/// Rectangle and fold strips for the return map, from an attractor sequence.
///
/// The `u`-range is the attractor's, the `w`-range its central 80% widened by a tenth.
/// Strips are the two `u`-intervals on either side of the fold, separated by `gap`
/// (a fraction of the `u`-range); they span the `w`-range, so run from the AC to the BD side.
pub fn horseshoe_rectangle(
    seq: &[SectionPoint],
    model: &PartitionModel,
    gap: f64,
) -> Option<(super::horseshoe::Quad, [super::horseshoe::Quad; 2])> {
    if seq.len() < 10 {
        return None;
    }
    let mut us: Vec<f64> = seq.iter().map(|q| q.u).collect();
    let mut ws: Vec<f64> = seq.iter().map(|q| q.w).collect();
    let (u0, u1) = (quantile(&mut us, 0.0), quantile(&mut us, 1.0));
    let (w0, w1) = (quantile(&mut ws, 0.1), quantile(&mut ws, 0.9));
    let pad = 0.1 * (w1 - w0);
    let (w0, w1) = (w0 - pad, w1 + pad);
    if !(u1 > u0 && w1 > w0 && model.u_c > u0 && model.u_c < u1) {
        return None;
    }
    // s runs along w (AC → BD), t along u (CD → AB)
    let rect = super::horseshoe::Quad {
        a: [u1, w0],
        b: [u1, w1],
        c: [u0, w0],
        d: [u0, w1],
    };
    let tc = (model.u_c - u0) / (u1 - u0);
    let g = 0.5 * gap;
    let strips = [rect.band(0.0, (tc - g).max(0.0)), rect.band((tc + g).min(1.0), 1.0)];
    Some((rect, strips))
}
