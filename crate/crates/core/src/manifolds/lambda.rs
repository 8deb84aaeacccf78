use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{grow_branch, BranchKind, HeteroclinicDiagnostics, ManifoldBranch, ManifoldError};
use crate::dynamics::{integrate, DenseSegment, IntegratorConfig, Params, State, Termination};
use crate::knot::{segment_distance, PolygonalKnot, Provenance};

/// Closure radius as a multiple of the attractor's bounding radius.
pub const CLOSURE_FACTOR: f64 = 10.0;

/// Largest norm along a long forward trajectory from near `P_In`; `None` if it escapes.
pub fn attractor_radius(p: &Params, cfg: &IntegratorConfig) -> Option<f64> {
    let tr = integrate(p, State::new(0.1, 0.0, 0.0), 600.0, cfg).ok()?;
    if tr.termination != Termination::TimeLimit {
        return None;
    }
    let skip = tr.times.iter().position(|&t| t >= 300.0)?;
    tr.states[skip..]
        .iter()
        .map(|s| s.norm())
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaOptions {
    pub h: f64,
    pub t_max: f64,
    pub cfg: IntegratorConfig,
    /// Vertex spacing near the attractor; it grows linearly with distance from the origin.
    pub spacing: f64,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        LambdaOptions {
            h: 1e-6,
            t_max: 200.0,
            cfg: IntegratorConfig::default(),
            spacing: 0.05,
        }
    }
}

/// Great-circle arc on the closure sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureArc {
    pub from: [f64; 3],
    pub to: [f64; 3],
    /// Angle swept, in radians; more than π when the long way round was needed.
    pub angle: f64,
    pub long_way: bool,
}

/// Index ranges of the pieces of `Λ` within the vertex list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaPieces {
    pub theta_out: (usize, usize),
    pub theta_in: (usize, usize),
    pub gamma_in: (usize, usize),
    pub arc: (usize, usize),
    pub gamma_out: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaKnot {
    pub params: Params,
    pub radius: f64,
    /// Closed: the first vertex is repeated at the end.
    pub vertices: Vec<[f64; 3]>,
    pub closure: ClosureArc,
    pub pieces: LambdaPieces,
    /// Gap left in `Θ` by the mismatch at `P0`.
    pub theta_gap: f64,
    pub min_spacing: f64,
    pub max_spacing: f64,
}

impl LambdaKnot {
    pub fn knot(&self) -> Result<PolygonalKnot, crate::knot::KnotError> {
        PolygonalKnot::new(self.vertices.clone(), Provenance::Lambda)
    }
}

fn to_arr(s: &State) -> [f64; 3] {
    [s.x, s.y, s.z]
}

/// Dense samples of a segment restricted to parameters in `[th0, th1]`, spacing-limited.
fn sample_segment(seg: &DenseSegment, th0: f64, th1: f64, spacing: &dyn Fn(&State) -> f64, out: &mut Vec<State>) {
    let a = seg.at_theta(th0);
    let b = seg.at_theta(th1);
    let ds = spacing(&a).min(spacing(&b));
    let n = (((b - a).norm() / ds).ceil() as usize).clamp(1, 10_000) * 2;
    for k in 1..=n {
        out.push(seg.at_theta(th0 + (th1 - th0) * k as f64 / n as f64));
    }
}

/// Branch trajectory in growth order up to branch time `t_stop` (same sign as the branch time).
fn branch_until(br: &ManifoldBranch, t_stop: f64, spacing: &dyn Fn(&State) -> f64) -> Vec<State> {
    let mut out = vec![br.trajectory.states[0]];
    for seg in &br.trajectory.segments {
        let (t0, t1) = (seg.t0, seg.t1());
        if (t1 - t_stop) * (t0 - t_stop) <= 0.0 && t0 != t_stop {
            sample_segment(seg, 0.0, seg.theta(t_stop), spacing, &mut out);
            return out;
        }
        sample_segment(seg, 0.0, 1.0, spacing, &mut out);
    }
    out
}

/// Branch trajectory up to its last outward crossing of the sphere of radius `r`.
fn branch_to_sphere(br: &ManifoldBranch, r: f64, spacing: &dyn Fn(&State) -> f64) -> Option<Vec<State>> {
    let segs = &br.trajectory.segments;
    let k = segs
        .iter()
        .rposition(|s| s.start().norm() < r && s.end().norm() >= r)?;
    // bisection on the dense output for ‖s‖ = r
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if segs[k].at_theta(mid).norm() < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut out = vec![br.trajectory.states[0]];
    for seg in &segs[..k] {
        sample_segment(seg, 0.0, 1.0, spacing, &mut out);
    }
    sample_segment(&segs[k], 0.0, hi, spacing, &mut out);
    let last = out.last_mut().unwrap();
    *last *= r / last.norm();
    Some(out)
}

fn slerp(a: &State, b: &State, r: f64, long_way: bool, ds: f64) -> (Vec<State>, f64) {
    let ua = a / a.norm();
    let ub = b / b.norm();
    let mut ang = ua.dot(&ub).clamp(-1.0, 1.0).acos();
    let mut axis = ua.cross(&ub);
    if axis.norm() < 1e-12 {
        // antipodal or coincident ends: any perpendicular will do
        let helper = if ua.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        axis = ua.cross(&helper);
    }
    axis /= axis.norm();
    if long_way {
        ang = std::f64::consts::TAU - ang;
        axis = -axis;
    }
    let n = ((r * ang / ds).ceil() as usize).max(2);
    let pts = (1..n)
        .map(|k| {
            let th = ang * k as f64 / n as f64;
            let v = ua * th.cos() + axis.cross(&ua) * th.sin() + axis * axis.dot(&ua) * (1.0 - th.cos());
            v * r
        })
        .collect();
    (pts, ang)
}

fn push_dedup(out: &mut Vec<[f64; 3]>, s: State, eps: f64) {
    let v = to_arr(&s);
    if let Some(l) = out.last() {
        let d = ((l[0] - v[0]).powi(2) + (l[1] - v[1]).powi(2) + (l[2] - v[2]).powi(2)).sqrt();
        if d <= eps {
            return;
        }
    }
    out.push(v);
}

/// Distance from the arc to the curve segments that reach beyond `inner`.
fn clearance(curve: &[State], arc: &[State], inner: f64) -> f64 {
    let mut best = f64::INFINITY;
    for w in arc.windows(2) {
        for c in curve.windows(2) {
            let (a, b) = (c[0], c[1]);
            if a.norm() < inner && b.norm() < inner {
                continue;
            }
            best = best.min(segment_distance(&w[0], &w[1], &a, &b));
        }
    }
    best
}

/// Closes `Θ ∪ Γ_In ∪ Γ_Out` into a polygon on the sphere of radius `radius`.
///
/// The vertex order is `P_Out → P0` along the unstable branch, `P0 → P_In` along the stable one,
/// then out along `Γ_In`, over the closure arc, and back in along `Γ_Out` to `P_Out`.
pub fn build_lambda_knot(
    p: &Params,
    diag: &HeteroclinicDiagnostics,
    radius: f64,
    opts: &LambdaOptions,
) -> Result<LambdaKnot, ManifoldError> {
    if !(radius > 0.0 && radius < opts.cfg.escape_radius) {
        return Err(ManifoldError::Setup(format!(
            "closure radius {radius} must lie below the escape radius {}",
            opts.cfg.escape_radius
        )));
    }
    let (pin, pout) = p.fixed_points()?;
    let scale = radius / CLOSURE_FACTOR;
    let spacing = move |s: &State| opts.spacing * (s.norm() / scale).max(1.0);
    let pairing = diag.pairing;
    let t_out = diag.out_crossing.time;
    let t_in = diag.in_crossing.time;
    let out_b = grow_branch(p, pairing.out_kind(), opts.h, t_out.abs() * 1.001 + 1e-9, &opts.cfg)?;
    let in_b = grow_branch(p, pairing.in_kind(), opts.h, t_in.abs() * 1.001 + 1e-9, &opts.cfg)?;
    let theta_out = branch_until(&out_b, t_out, &spacing);
    let mut theta_in = branch_until(&in_b, t_in, &spacing);
    theta_in.reverse();
    let gin_kind = BranchKind::with_sign(true, !pairing.in_plus);
    let gout_kind = BranchKind::with_sign(false, !pairing.out_plus);
    let g_in = grow_branch(p, gin_kind, opts.h, opts.t_max, &opts.cfg)?;
    let g_out = grow_branch(p, gout_kind, opts.h, opts.t_max, &opts.cfg)?;
    let unbounded = |b: &ManifoldBranch| {
        ManifoldError::Setup(format!("{} does not reach radius {radius}", b.seed.kind.label()))
    };
    let gamma_in = branch_to_sphere(&g_in, radius, &spacing).ok_or_else(|| unbounded(&g_in))?;
    let mut gamma_out = branch_to_sphere(&g_out, radius, &spacing).ok_or_else(|| unbounded(&g_out))?;
    gamma_out.reverse();

    let eps = 1e-12 * (1.0 + radius);
    let mut v: Vec<[f64; 3]> = Vec::new();
    push_dedup(&mut v, pout, eps);
    for s in &theta_out {
        push_dedup(&mut v, *s, eps);
    }
    let p_theta_out = (0, v.len());
    let theta_start = v.len();
    for s in &theta_in {
        push_dedup(&mut v, *s, eps);
    }
    push_dedup(&mut v, pin, eps);
    let p_theta_in = (theta_start, v.len());
    let gin_start = v.len();
    for s in &gamma_in {
        push_dedup(&mut v, *s, eps);
    }
    let p_gamma_in = (gin_start, v.len());
    let a = *gamma_in.last().unwrap();
    let b = *gamma_out.first().unwrap();
    let ds_arc = spacing(&a);
    let mut chosen = None;
    for long_way in [false, true] {
        let (arc, ang) = slerp(&a, &b, radius, long_way, ds_arc);
        let mut probe = vec![a];
        probe.extend(arc.iter().copied());
        probe.push(b);
        // everything except the two segments touching the arc must keep clear of it
        let mut rest: Vec<State> = theta_out.clone();
        rest.extend(theta_in.iter().copied());
        let gap = clearance(&rest, &probe, 0.5 * radius)
            .min(clearance(&gamma_in[..gamma_in.len().saturating_sub(1)], &probe, 0.5 * radius))
            .min(clearance(&gamma_out[1.min(gamma_out.len())..], &probe, 0.5 * radius));
        if gap > 10.0 * eps {
            chosen = Some((arc, ang, long_way));
            break;
        }
    }
    let (arc, ang, long_way) = chosen.ok_or(ManifoldError::ClosureIntersection { radius })?;
    let arc_start = v.len();
    for s in &arc {
        push_dedup(&mut v, *s, eps);
    }
    let p_arc = (arc_start, v.len());
    let gout_start = v.len();
    for s in &gamma_out {
        push_dedup(&mut v, *s, eps);
    }
    let p_gamma_out = (gout_start, v.len());
    if v.first() != v.last() {
        let first = v[0];
        v.push(first);
    }
    let lens: Vec<f64> = v
        .windows(2)
        .map(|w| (Vector3::from(w[1]) - Vector3::from(w[0])).norm())
        .collect();
    let gap_vec = Vector3::from(diag.out_crossing.state) - Vector3::from(diag.in_crossing.state);
    Ok(LambdaKnot {
        params: *p,
        radius,
        closure: ClosureArc {
            from: to_arr(&a),
            to: to_arr(&b),
            angle: ang,
            long_way,
        },
        pieces: LambdaPieces {
            theta_out: p_theta_out,
            theta_in: p_theta_in,
            gamma_in: p_gamma_in,
            arc: p_arc,
            gamma_out: p_gamma_out,
        },
        theta_gap: gap_vec.norm(),
        min_spacing: lens.iter().copied().fold(f64::INFINITY, f64::min),
        max_spacing: lens.iter().copied().fold(0.0, f64::max),
        vertices: v,
    })
}
