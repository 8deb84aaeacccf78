//! One-dimensional invariant manifolds of the two saddle-foci, the heteroclinic mismatch
//! between them, and the closed curve `Λ` built from them.
//!
//! Branch sides follow a fixed convention: `W^s_In+` leaves `P_In` towards `z > 0`, and
//! `W^u_Out+` leaves `P_Out` towards `y > y_Out`. The `−` sides are the unbounded pieces
//! `Γ_In` and `Γ_Out`.

mod heteroclinic;
mod lambda;
mod search;

pub use heteroclinic::{
    coincidence_diagnostic, first_upper_crossing, heteroclinic_mismatch, BranchCrossing,
    CoincidenceReport, HeteroclinicDiagnostics, MismatchOptions, Pairing,
};
pub use lambda::{
    attractor_radius, build_lambda_knot, ClosureArc, LambdaKnot, LambdaOptions, LambdaPieces,
    CLOSURE_FACTOR,
};
pub use search::{
    broyden_solve, find_trefoil_candidate, lambda_summary, BroydenOptions, BroydenResult,
    LambdaSummary, ParamAxis, SearchOptions, SearchOutcome, TrefoilSearch,
};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    classify_fixed_point, DynamicsError, FixedPointKind, IntegratorConfig, Params, State,
    Stepper, Termination, Trajectory,
};
use crate::section::{SectionError, CAPTURE_RADIUS};

pub const MIN_SEED_OFFSET: f64 = 1e-7;
pub const MAX_SEED_OFFSET: f64 = 1e-4;
pub const EIGEN_RESIDUAL_LIMIT: f64 = 1e-9;
/// Slack in the trapping predicates.
pub const TRAP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error("seed offset {0:e} outside [1e-7, 1e-4]")]
    SeedOffset(f64),
    #[error("{which:?}: fixed point has type {kind:?}, the requested direction does not exist")]
    WrongType {
        which: BranchKind,
        kind: FixedPointKind,
    },
    #[error("eigenvector residual {0:e} exceeds limit")]
    EigenResidual(f64),
    #[error("no branch pairing produced a U_p crossing on both sides")]
    NoCandidate,
    #[error("closure arc meets the curve at radius {radius}")]
    ClosureIntersection { radius: f64 },
    #[error("invalid search setup: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchKind {
    WsInPlus,
    WsInMinus,
    WuOutPlus,
    WuOutMinus,
}

impl BranchKind {
    pub const ALL: [BranchKind; 4] = [
        BranchKind::WsInPlus,
        BranchKind::WsInMinus,
        BranchKind::WuOutPlus,
        BranchKind::WuOutMinus,
    ];

    pub fn is_stable_in(self) -> bool {
        matches!(self, BranchKind::WsInPlus | BranchKind::WsInMinus)
    }

    pub fn sign(self) -> f64 {
        match self {
            BranchKind::WsInPlus | BranchKind::WuOutPlus => 1.0,
            _ => -1.0,
        }
    }

    /// Integration direction along which the branch grows away from its fixed point.
    pub fn time_direction(self) -> f64 {
        if self.is_stable_in() {
            -1.0
        } else {
            1.0
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BranchKind::WsInPlus => "Ws_In+",
            BranchKind::WsInMinus => "Ws_In-",
            BranchKind::WuOutPlus => "Wu_Out+",
            BranchKind::WuOutMinus => "Wu_Out-",
        }
    }

    pub fn with_sign(stable_in: bool, plus: bool) -> BranchKind {
        match (stable_in, plus) {
            (true, true) => BranchKind::WsInPlus,
            (true, false) => BranchKind::WsInMinus,
            (false, true) => BranchKind::WuOutPlus,
            (false, false) => BranchKind::WuOutMinus,
        }
    }
}

/// Unit null vector of a singular 3×3 matrix, from the largest cross product of its rows.
fn null_vector(m: &Matrix3<f64>) -> Vector3<f64> {
    let r: [Vector3<f64>; 3] = [0, 1, 2].map(|i| m.row(i).transpose());
    let cands = [r[0].cross(&r[1]), r[0].cross(&r[2]), r[1].cross(&r[2])];
    let best = cands
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("three candidates");
    best / best.norm()
}

fn null_vector_complex(m: &Matrix3<Complex64>) -> Vector3<Complex64> {
    let r: [Vector3<Complex64>; 3] = [0, 1, 2].map(|i| m.row(i).transpose());
    let cross = |a: &Vector3<Complex64>, b: &Vector3<Complex64>| {
        Vector3::new(
            a.y * b.z - a.z * b.y,
            a.z * b.x - a.x * b.z,
            a.x * b.y - a.y * b.x,
        )
    };
    let cands = [cross(&r[0], &r[1]), cross(&r[0], &r[2]), cross(&r[1], &r[2])];
    let norm = |v: &Vector3<Complex64>| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let best = cands
        .iter()
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .expect("three candidates");
    best / Complex64::new(norm(best), 0.0)
}

/// Real eigen-direction at a fixed point, with its eigenvalue and residual `‖Jv − γv‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealEigen {
    pub value: f64,
    pub vector: [f64; 3],
    pub residual: f64,
}

pub fn real_eigen(p: &Params, s: &State) -> Result<RealEigen, DynamicsError> {
    let fa = classify_fixed_point(p, s)?;
    let j = p.jacobian(s);
    let g = fa.real_eig;
    let mut v = null_vector(&(j - Matrix3::identity() * g));
    // one step of inverse iteration with a slightly shifted eigenvalue
    let shift = g + 1e-10 * (1.0 + g.abs());
    if let Some(w) = (j - Matrix3::identity() * shift).lu().solve(&v) {
        if w.iter().all(|x| x.is_finite()) && w.norm() > 0.0 {
            let w = w / w.norm();
            let res_w = (j * w - w * g).norm();
            let res_v = (j * v - v * g).norm();
            if res_w < res_v {
                v = w;
            }
        }
    }
    let residual = (j * v - v * g).norm();
    Ok(RealEigen {
        value: g,
        vector: [v.x, v.y, v.z],
        residual,
    })
}

/// Orthonormal basis `(e1, e2)` of the real plane spanned by the complex eigenvector pair.
pub fn focus_plane(p: &Params, s: &State) -> Result<(State, State), DynamicsError> {
    let fa = classify_fixed_point(p, s)?;
    let j = p.jacobian(s);
    let l = Complex64::new(fa.rho, fa.psi);
    let m = j.map(|x| Complex64::new(x, 0.0)) - Matrix3::identity() * l;
    let w = null_vector_complex(&m);
    let re = w.map(|c| c.re);
    let im = w.map(|c| c.im);
    let e1 = if re.norm() >= im.norm() { re } else { im };
    let e1 = e1 / e1.norm();
    let other = if re.norm() >= im.norm() { im } else { re };
    let e2 = other - e1 * e1.dot(&other);
    Ok((e1, e2 / e2.norm()))
}

/// Seed point and oriented eigen-direction of a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSeed {
    pub kind: BranchKind,
    pub base: [f64; 3],
    pub direction: [f64; 3],
    pub eigenvalue: f64,
    pub h: f64,
    pub eigen_residual: f64,
}

impl BranchSeed {
    pub fn point(&self) -> State {
        State::from(self.base) + State::from(self.direction) * self.h
    }
}

pub fn branch_seed(p: &Params, kind: BranchKind, h: f64) -> Result<BranchSeed, ManifoldError> {
    if !(MIN_SEED_OFFSET..=MAX_SEED_OFFSET).contains(&h) {
        return Err(ManifoldError::SeedOffset(h));
    }
    let (pin, pout) = p.fixed_points()?;
    let base = if kind.is_stable_in() { pin } else { pout };
    let fa = classify_fixed_point(p, &base)?;
    // only the sign of the real eigenvalue matters for the existence of the branch
    let exists = if kind.is_stable_in() {
        fa.real_eig < 0.0
    } else {
        fa.real_eig > 0.0
    };
    if !exists {
        return Err(ManifoldError::WrongType {
            which: kind,
            kind: fa.kind,
        });
    }
    let eig = real_eigen(p, &base)?;
    if eig.residual > EIGEN_RESIDUAL_LIMIT {
        return Err(ManifoldError::EigenResidual(eig.residual));
    }
    let mut v = State::from(eig.vector);
    let key = if kind.is_stable_in() { v.z } else { v.y };
    if key < 0.0 || (key == 0.0 && v.x < 0.0) {
        v = -v;
    }
    let v = v * kind.sign();
    Ok(BranchSeed {
        kind,
        base: [base.x, base.y, base.z],
        direction: [v.x, v.y, v.z],
        eigenvalue: eig.value,
        h,
        eigen_residual: eig.residual,
    })
}

/// A branch integrated away from its fixed point.
#[derive(Debug, Clone)]
pub struct ManifoldBranch {
    pub seed: BranchSeed,
    /// Backward time for `W^s_In`, forward for `W^u_Out`.
    pub trajectory: Trajectory,
}

pub fn grow_branch(
    p: &Params,
    kind: BranchKind,
    h: f64,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<ManifoldBranch, ManifoldError> {
    cfg.validate()?;
    let seed = branch_seed(p, kind, h)?;
    let (pin, pout) = p.fixed_points()?;
    let opposite = if kind.is_stable_in() { pout } else { pin };
    let s0 = seed.point();
    let t_end = kind.time_direction() * t_max;
    let mut stepper = Stepper::new(p, s0, 0.0, kind.time_direction(), *cfg);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![s0],
        segments: Vec::new(),
        termination: Termination::TimeLimit,
    };
    while stepper.time() != t_end {
        let seg = stepper.step(t_end)?;
        let y = stepper.state();
        traj.times.push(stepper.time());
        traj.states.push(y);
        traj.segments.push(seg);
        if y.norm() > cfg.escape_radius {
            traj.termination = Termination::Escape;
            break;
        }
        if (y - opposite).norm() < CAPTURE_RADIUS || p.field(&y).norm() < cfg.fixed_point_eps {
            traj.termination = Termination::FixedPoint;
            break;
        }
    }
    Ok(ManifoldBranch {
        seed,
        trajectory: traj,
    })
}

/// Tail behavior of an unbounded branch against its trapping region.
///
/// For `Γ_In` the region is `y ≥ 0` with `y` non-decreasing along the branch, i.e. towards
/// backward time; for `Γ_Out` it is `y ≤ y_Out = (ab − c)/a` with `y` non-increasing along
/// forward time. `literal_fraction` is the share of tail samples with forward-time `ẏ ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappingReport {
    pub branch: BranchKind,
    pub termination: Termination,
    /// Branch time after which every dense sample satisfies the predicate.
    pub entry_time: Option<f64>,
    pub tail_samples: usize,
    pub total_samples: usize,
    /// Most negative predicate slack over the tail (zero when none is negative).
    pub worst_tail_slack: f64,
    pub literal_fraction: f64,
    /// Entry time exists and the branch escapes while trapped.
    pub trapped: bool,
}

const TRAP_SAMPLES_PER_STEP: usize = 8;

/// Smallest slack of the trapping predicate at `s`; non-negative means satisfied.
pub fn trap_slack(p: &Params, kind: BranchKind, s: &State) -> f64 {
    let ydot = s.x + p.a * s.y;
    let along = kind.time_direction() * ydot;
    if kind.is_stable_in() {
        s.y.min(along) + TRAP_SLACK
    } else {
        let y_out = b_minus_c_over_a(p);
        (y_out - s.y).min(-along) + TRAP_SLACK
    }
}

fn b_minus_c_over_a(p: &Params) -> f64 {
    (p.a * p.b - p.c) / p.a
}

pub fn trapping_report(p: &Params, branch: &ManifoldBranch) -> TrappingReport {
    let kind = branch.seed.kind;
    let tr = &branch.trajectory;
    let mut samples: Vec<(f64, State)> = vec![(tr.times[0], tr.states[0])];
    for seg in &tr.segments {
        for k in 1..=TRAP_SAMPLES_PER_STEP {
            let th = k as f64 / TRAP_SAMPLES_PER_STEP as f64;
            let s = if k == TRAP_SAMPLES_PER_STEP {
                seg.end()
            } else {
                seg.at_theta(th)
            };
            samples.push((seg.t0 + th * seg.h, s));
        }
    }
    let last_bad = samples
        .iter()
        .rposition(|(_, s)| trap_slack(p, kind, s) < 0.0);
    let first_tail = last_bad.map_or(0, |i| i + 1);
    let tail = &samples[first_tail..];
    let entry_time = tail.first().map(|(t, _)| *t);
    let worst = tail
        .iter()
        .map(|(_, s)| trap_slack(p, kind, s) - TRAP_SLACK)
        .fold(0.0f64, f64::min);
    let literal = tail
        .iter()
        .filter(|(_, s)| s.x + p.a * s.y >= -TRAP_SLACK)
        .count();
    let literal_fraction = if tail.is_empty() {
        0.0
    } else {
        literal as f64 / tail.len() as f64
    };
    TrappingReport {
        branch: kind,
        termination: tr.termination,
        entry_time,
        tail_samples: tail.len(),
        total_samples: samples.len(),
        worst_tail_slack: worst,
        literal_fraction,
        trapped: entry_time.is_some() && tr.termination == Termination::Escape && tail.len() > 1,
    }
}



#[cfg(test)]
mod tests;
