//! The cross-section `Y = {ẏ = 0} = {x + a·y = 0}`, charted by `(u, w) = (x, z)`.
//!
//! `Y` splits along `l_p = {(x, −x/a, x/a)}` into the upper half-plane `U_p` (`z > x/a`), where
//! the flow crosses from `ẏ > 0` to `ẏ < 0`, and the lower half-plane `L_p` (`z < x/a`), where it
//! crosses the other way. The first-return map lives on `U_p`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DenseSegment, DynamicsError, IntegratorConfig, Params, State, Stepper};
use crate::exec::Execution;

/// Tie band around `l_p`.
pub const LINE_TIE_BAND: f64 = 1e-12;
/// Trajectories entering this ball around a fixed point are reported as captured.
pub const CAPTURE_RADIUS: f64 = 1e-8;
pub const DEFAULT_T_MAX: f64 = 1e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SectionError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("no crossing within t_max = {t_max}")]
    NoCrossing { t_max: f64 },
    #[error("trajectory escaped at t = {t}")]
    Escape { t: f64 },
    #[error("trajectory captured by {which:?} at t = {t}")]
    FixedPointCapture { which: FixedPointLabel, t: f64 },
    #[error("start point is a fixed point")]
    StartsAtFixedPoint,
    #[error("point is not strictly inside U_p (margin {margin:e})")]
    NotInUpper { margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointLabel {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    OnSection(Side),
    OffSection,
}

/// Chart of the plane `x + a y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionChart {
    pub a: f64,
}

impl SectionChart {
    pub fn new(p: &Params) -> Self {
        SectionChart { a: p.a }
    }

    pub fn to_state(&self, u: f64, w: f64) -> State {
        Vector3::new(u, -u / self.a, w)
    }

    pub fn from_state(&self, s: &State) -> (f64, f64) {
        (s.x, s.z)
    }

    pub fn normal(&self) -> State {
        Vector3::new(1.0, self.a, 0.0)
    }

    /// Signed distance-like margin `w − u/a`; positive on `U_p`.
    pub fn margin(&self, u: f64, w: f64) -> f64 {
        w - u / self.a
    }

    pub fn side(&self, u: f64, w: f64) -> Side {
        let m = self.margin(u, w);
        if m.abs() <= LINE_TIE_BAND * (1.0 + w.abs().max((u / self.a).abs())) {
            Side::Line
        } else if m > 0.0 {
            Side::Upper
        } else {
            Side::Lower
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub u: f64,
    pub w: f64,
    pub side: Side,
}

impl SectionPoint {
    pub fn new(p: &Params, u: f64, w: f64) -> Self {
        SectionPoint {
            u,
            w,
            side: SectionChart::new(p).side(u, w),
        }
    }

    pub fn from_state(p: &Params, s: &State) -> Self {
        SectionPoint::new(p, s.x, s.z)
    }

    pub fn to_state(&self, p: &Params) -> State {
        SectionChart::new(p).to_state(self.u, self.w)
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.u, self.w]
    }
}

/// `g = x + a y`, which equals `ẏ`.
#[inline]
pub fn section_function(p: &Params, s: &State) -> f64 {
    s.x + p.a * s.y
}

/// `d/dt ẏ` along the flow; negative exactly on `U_p` crossings.
#[inline]
pub fn transversality_margin(p: &Params, s: &State) -> f64 {
    let f = p.field(s);
    f.x + p.a * f.y
}

pub fn classify_point(p: &Params, s: &State) -> PointClass {
    if section_function(p, s).abs() > 1e-10 * (1.0 + s.norm()) {
        return PointClass::OffSection;
    }
    let m = s.z - s.x / p.a;
    if m.abs() <= LINE_TIE_BAND {
        PointClass::OnSection(Side::Line)
    } else if m > 0.0 {
        PointClass::OnSection(Side::Upper)
    } else {
        PointClass::OnSection(Side::Lower)
    }
}

/// A refined passage through the section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub state: State,
    /// Time relative to the start of the search; negative in backward searches.
    pub time: f64,
    pub side: Side,
    pub margin: f64,
}

/// What [`scan_crossings`] should do after a crossing.
pub enum Scan {
    Continue,
    Stop,
}

/// Options shared by the crossing searches.
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub t_max: f64,
    /// `+1` forward, `−1` backward.
    pub direction: f64,
    pub capture: bool,
}

fn refine_on_segment(p: &Params, seg: &DenseSegment, mut lo: f64, mut hi: f64) -> f64 {
    let g = |th: f64| section_function(p, &seg.at_theta(th));
    let mut glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return lo;
    }
    if ghi == 0.0 {
        return hi;
    }
    let mut th = lo + (hi - lo) * glo / (glo - ghi);
    for _ in 0..200 {
        let s = seg.at_theta(th);
        let gv = section_function(p, &s);
        let scale = 1e-15 * (1.0 + s.norm());
        if gv.abs() <= scale || hi - lo <= 1e-16 {
            break;
        }
        if (gv > 0.0) == (glo > 0.0) {
            lo = th;
            glo = gv;
        } else {
            hi = th;
        }
        let d = seg.dtheta(th);
        let dg = d.x + p.a * d.y;
        let newton = th - gv / dg;
        th = if dg != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    th
}

/// Integrates from `s0` and reports every refined crossing of `Y` to `on_crossing` until it
/// returns [`Scan::Stop`]. Crossings within `1e-9` of the start are skipped when `s0` itself
/// lies on `Y`.
pub fn scan_crossings<F>(
    p: &Params,
    s0: State,
    opts: ScanOptions,
    cfg: &IntegratorConfig,
    mut on_crossing: F,
) -> Result<Crossing, SectionError>
where
    F: FnMut(&Crossing) -> Scan,
{
    cfg.validate()?;
    let f0 = p.field(&s0);
    if f0.norm() < cfg.fixed_point_eps {
        return Err(SectionError::StartsAtFixedPoint);
    }
    let (pin, pout) = p.fixed_points()?;
    let starts_on_section = section_function(p, &s0).abs() <= 1e-10 * (1.0 + s0.norm());
    let dir = if opts.direction < 0.0 { -1.0 } else { 1.0 };
    let t_end = dir * opts.t_max;
    let mut stepper = Stepper::new(p, s0, 0.0, dir, *cfg);
    const PROBES: usize = 4;
    while stepper.time() != t_end {
        let seg = stepper.step(t_end)?;
        let mut prev_th = 0.0;
        let mut prev_g = section_function(p, &seg.start());
        for k in 1..=PROBES {
            let th = k as f64 / PROBES as f64;
            let gk = if k == PROBES {
                section_function(p, &seg.end())
            } else {
                section_function(p, &seg.at_theta(th))
            };
            let bracket = (prev_g > 0.0 && gk <= 0.0) || (prev_g < 0.0 && gk >= 0.0);
            if bracket {
                let root = refine_on_segment(p, &seg, prev_th, th);
                let state = seg.at_theta(root);
                let time = seg.t0 + root * seg.h;
                let skip = starts_on_section && time.abs() < 1e-9;
                if !skip {
                    let margin = transversality_margin(p, &state);
                    // crossing side follows the sign of d/dt ẏ, independent of time direction
                    let side = if margin < 0.0 {
                        Side::Upper
                    } else if margin > 0.0 {
                        Side::Lower
                    } else {
                        Side::Line
                    };
                    let c = Crossing {
                        state,
                        time,
                        side,
                        margin,
                    };
                    if let Scan::Stop = on_crossing(&c) {
                        return Ok(c);
                    }
                }
            }
            prev_th = th;
            prev_g = gk;
        }
        let y = stepper.state();
        if y.norm() > cfg.escape_radius {
            return Err(SectionError::Escape { t: stepper.time() });
        }
        if opts.capture {
            if (y - pin).norm() < CAPTURE_RADIUS {
                return Err(SectionError::FixedPointCapture {
                    which: FixedPointLabel::In,
                    t: stepper.time(),
                });
            }
            if (y - pout).norm() < CAPTURE_RADIUS {
                return Err(SectionError::FixedPointCapture {
                    which: FixedPointLabel::Out,
                    t: stepper.time(),
                });
            }
        }
        if p.field(&y).norm() < cfg.fixed_point_eps {
            return Err(SectionError::FixedPointCapture {
                which: if (y - pin).norm() < (y - pout).norm() {
                    FixedPointLabel::In
                } else {
                    FixedPointLabel::Out
                },
                t: stepper.time(),
            });
        }
    }
    Err(SectionError::NoCrossing { t_max: opts.t_max })
}

/// Next forward crossing of `U_p` (or `L_p`) after `s0`.
pub fn next_crossing(
    p: &Params,
    s0: State,
    target: Side,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<Crossing, SectionError> {
    let opts = ScanOptions {
        t_max,
        direction: 1.0,
        capture: true,
    };
    scan_crossings(p, s0, opts, cfg, |c| {
        if c.side == target {
            Scan::Stop
        } else {
            Scan::Continue
        }
    })
}

/// One application of the first-return map on `U_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnMapSample {
    pub in_point: SectionPoint,
    pub out_point: SectionPoint,
    pub return_time: f64,
    pub transversality_margin: f64,
    pub lower_crossings: usize,
}

/// Required distance of a start point from `l_p`.
pub const UPPER_MARGIN: f64 = 1e-9;

pub fn first_return(
    p: &Params,
    q: &SectionPoint,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<ReturnMapSample, SectionError> {
    let chart = SectionChart::new(p);
    let margin = chart.margin(q.u, q.w);
    if !(margin >= UPPER_MARGIN) {
        return Err(SectionError::NotInUpper { margin });
    }
    let s0 = chart.to_state(q.u, q.w);
    let mut lower = 0usize;
    let opts = ScanOptions {
        t_max,
        direction: 1.0,
        capture: true,
    };
    let c = scan_crossings(p, s0, opts, cfg, |c| match c.side {
        Side::Upper => Scan::Stop,
        _ => {
            lower += 1;
            Scan::Continue
        }
    })?;
    let (u, w) = chart.from_state(&c.state);
    Ok(ReturnMapSample {
        in_point: SectionPoint::new(p, q.u, q.w),
        out_point: SectionPoint::new(p, u, w),
        return_time: c.time,
        transversality_margin: c.margin,
        lower_crossings: lower,
    })
}

/// Axis-aligned rectangle in section coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionRect {
    pub u_min: f64,
    pub u_max: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl SectionRect {
    pub fn is_empty(&self) -> bool {
        !(self.u_max > self.u_min && self.w_max > self.w_min)
    }
}

/// Return map evaluated on an `n × m` node grid; failures are kept per node.
#[derive(Debug, Clone)]
pub struct ReturnGrid {
    pub n: usize,
    pub m: usize,
    /// Row-major over `(i, j)` with `u` varying along `i`.
    pub nodes: Vec<SectionPoint>,
    pub results: Vec<Result<ReturnMapSample, SectionError>>,
}

impl ReturnGrid {
    pub fn samples(&self) -> impl Iterator<Item = &ReturnMapSample> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.is_err()).count()
    }

    pub fn at(&self, i: usize, j: usize) -> &Result<ReturnMapSample, SectionError> {
        &self.results[j * self.n + i]
    }
}

/// Grid coordinate `lo + (hi − lo)·i/(n − 1)`; shared nodes of a `2n − 1` refinement are
/// bit-identical.
pub fn grid_coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if n <= 1 {
        return 0.5 * (lo + hi);
    }
    lo + (hi - lo) * (i as f64 / (n - 1) as f64)
}

pub fn return_map_grid(
    p: &Params,
    rect: &SectionRect,
    n: usize,
    m: usize,
    t_max: f64,
    cfg: &IntegratorConfig,
    exec: Execution,
) -> ReturnGrid {
    if rect.is_empty() || n == 0 || m == 0 {
        return ReturnGrid {
            n: 0,
            m: 0,
            nodes: Vec::new(),
            results: Vec::new(),
        };
    }
    let nodes: Vec<SectionPoint> = (0..m)
        .flat_map(|j| {
            (0..n).map(move |i| {
                SectionPoint::new(
                    p,
                    grid_coord(rect.u_min, rect.u_max, i, n),
                    grid_coord(rect.w_min, rect.w_max, j, m),
                )
            })
        })
        .collect();
    let results = exec.map(&nodes, |q| first_return(p, q, t_max, cfg));
    ReturnGrid {
        n,
        m,
        nodes,
        results,
    }
}

#[cfg(test)]
mod tests;
