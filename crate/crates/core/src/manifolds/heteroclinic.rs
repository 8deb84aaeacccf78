use serde::{Deserialize, Serialize};

use super::{
    branch_seed, focus_plane, grow_branch, real_eigen, trapping_report, BranchKind,
    ManifoldError, TrappingReport,
};
use crate::dynamics::{IntegratorConfig, Params, State, Stepper};
use crate::section::{scan_crossings, Scan, ScanOptions, SectionPoint, Side};

/// First `U_p` crossing met while growing a branch, plus the `L_p` crossings before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCrossing {
    pub kind: BranchKind,
    pub point: SectionPoint,
    pub state: [f64; 3],
    /// Branch time, negative for `W^s_In`.
    pub time: f64,
    pub margin: f64,
    /// `L_p` crossings in branch order.
    pub lower_points: Vec<SectionPoint>,
}

pub fn first_upper_crossing(
    p: &Params,
    kind: BranchKind,
    h: f64,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<BranchCrossing, ManifoldError> {
    let seed = branch_seed(p, kind, h)?;
    let opts = ScanOptions {
        t_max,
        direction: kind.time_direction(),
        capture: true,
    };
    let mut lower = Vec::new();
    let c = scan_crossings(p, seed.point(), opts, cfg, |c| match c.side {
        Side::Upper => Scan::Stop,
        _ => {
            lower.push(SectionPoint::from_state(p, &c.state));
            Scan::Continue
        }
    })?;
    Ok(BranchCrossing {
        kind,
        point: SectionPoint::from_state(p, &c.state),
        state: [c.state.x, c.state.y, c.state.z],
        time: c.time,
        margin: c.margin,
        lower_points: lower,
    })
}

/// Which side of each manifold is matched on `U_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub out_plus: bool,
    pub in_plus: bool,
}

impl Pairing {
    pub const BOUNDED: Pairing = Pairing {
        out_plus: true,
        in_plus: true,
    };

    pub fn out_kind(self) -> BranchKind {
        BranchKind::with_sign(false, self.out_plus)
    }

    pub fn in_kind(self) -> BranchKind {
        BranchKind::with_sign(true, self.in_plus)
    }

    pub fn label(self) -> String {
        format!("{}/{}", self.out_kind().label(), self.in_kind().label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchOptions {
    pub h: f64,
    pub t_max: f64,
    pub cfg: IntegratorConfig,
    /// `None` picks the pairing with the smallest mismatch.
    pub pairing: Option<Pairing>,
    /// Also grow the two unmatched branches and test their trapping regions.
    pub trapping: bool,
}

impl Default for MismatchOptions {
    fn default() -> Self {
        MismatchOptions {
            h: 1e-6,
            t_max: 200.0,
            cfg: IntegratorConfig::default(),
            pairing: None,
            trapping: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicDiagnostics {
    pub params: Params,
    pub h: f64,
    pub pairing: Pairing,
    /// `P0(W^u_Out) − P0(W^s_In)` in `(u, w)`.
    pub mismatch: [f64; 2],
    pub mismatch_norm: f64,
    /// `U_p` crossing of the unstable side.
    pub p0_candidate: SectionPoint,
    /// First `L_p` crossing of `Θ` in forward time, if any.
    pub p1_candidate: Option<SectionPoint>,
    pub n_u: usize,
    pub n_l: usize,
    pub out_crossing: BranchCrossing,
    pub in_crossing: BranchCrossing,
    pub trapping_in: Option<TrappingReport>,
    pub trapping_out: Option<TrappingReport>,
}

impl HeteroclinicDiagnostics {
    /// Crossing counts of a trefoil candidate: once through `U_p`, once through `L_p`.
    pub fn single_winding(&self) -> bool {
        self.n_u == 1 && self.n_l == 1
    }

    /// `Θ` in forward time: `P_Out → P0` along the unstable side, then `P0 → P_In`.
    pub fn theta_lower_points(&self) -> Vec<SectionPoint> {
        let mut pts = self.out_crossing.lower_points.clone();
        pts.extend(self.in_crossing.lower_points.iter().rev().copied());
        pts
    }
}

fn diagnostics_from(
    p: &Params,
    h: f64,
    pairing: Pairing,
    out: BranchCrossing,
    inn: BranchCrossing,
) -> HeteroclinicDiagnostics {
    let mismatch = [out.point.u - inn.point.u, out.point.w - inn.point.w];
    let mut d = HeteroclinicDiagnostics {
        params: *p,
        h,
        pairing,
        mismatch,
        mismatch_norm: mismatch[0].hypot(mismatch[1]),
        p0_candidate: out.point,
        p1_candidate: None,
        n_u: 1,
        n_l: out.lower_points.len() + inn.lower_points.len(),
        out_crossing: out,
        in_crossing: inn,
        trapping_in: None,
        trapping_out: None,
    };
    d.p1_candidate = d.theta_lower_points().first().copied();
    d
}

pub fn heteroclinic_mismatch(
    p: &Params,
    opts: &MismatchOptions,
) -> Result<HeteroclinicDiagnostics, ManifoldError> {
    let cross = |kind| first_upper_crossing(p, kind, opts.h, opts.t_max, &opts.cfg);
    let mut d = match opts.pairing {
        Some(pairing) => {
            let out = cross(pairing.out_kind())?;
            let inn = cross(pairing.in_kind())?;
            diagnostics_from(p, opts.h, pairing, out, inn)
        }
        None => {
            let outs = [cross(BranchKind::WuOutPlus), cross(BranchKind::WuOutMinus)];
            let ins = [cross(BranchKind::WsInPlus), cross(BranchKind::WsInMinus)];
            let mut best: Option<HeteroclinicDiagnostics> = None;
            let mut first_err = None;
            for (oi, o) in outs.iter().enumerate() {
                for (ii, i) in ins.iter().enumerate() {
                    match (o, i) {
                        (Ok(o), Ok(i)) => {
                            let pairing = Pairing {
                                out_plus: oi == 0,
                                in_plus: ii == 0,
                            };
                            let cand = diagnostics_from(p, opts.h, pairing, o.clone(), i.clone());
                            if best
                                .as_ref()
                                .is_none_or(|b| cand.mismatch_norm < b.mismatch_norm)
                            {
                                best = Some(cand);
                            }
                        }
                        (Err(e), _) | (_, Err(e)) => {
                            first_err.get_or_insert_with(|| e.clone());
                        }
                    }
                }
            }
            match (best, first_err) {
                (Some(b), _) => b,
                (None, Some(e)) => return Err(e),
                (None, None) => return Err(ManifoldError::NoCandidate),
            }
        }
    };
    if opts.trapping {
        let gamma_in = BranchKind::with_sign(true, !d.pairing.in_plus);
        let gamma_out = BranchKind::with_sign(false, !d.pairing.out_plus);
        d.trapping_in = grow_branch(p, gamma_in, opts.h, opts.t_max, &opts.cfg)
            .ok()
            .map(|b| trapping_report(p, &b));
        d.trapping_out = grow_branch(p, gamma_out, opts.h, opts.t_max, &opts.cfg)
            .ok()
            .map(|b| trapping_report(p, &b));
    }
    Ok(d)
}

/// Distance between forward images of a small circle in `W^u_In` and the local stable plane
/// of `P_Out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceReport {
    pub circle_radius: f64,
    pub local_radius: f64,
    pub n_points: usize,
    /// Circle points whose forward orbit entered the `local_radius` ball around `P_Out`.
    pub reached: usize,
    /// Smallest `|n·(s − P_Out)|` seen inside the ball, per reaching point.
    pub min_plane_distance: Option<f64>,
    pub median_plane_distance: Option<f64>,
}

pub fn coincidence_diagnostic(
    p: &Params,
    circle_radius: f64,
    local_radius: f64,
    n_points: usize,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<CoincidenceReport, ManifoldError> {
    let (pin, pout) = p.fixed_points()?;
    let (e1, e2) = focus_plane(p, &pin)?;
    // normal of the stable focus plane: left eigenvector of the real eigenvalue at P_Out
    let jt = p.jacobian(&pout).transpose();
    let gamma = real_eigen(p, &pout)?.value;
    let normal = super::null_vector(&(jt - nalgebra::Matrix3::identity() * gamma));
    let mut dists = Vec::new();
    for k in 0..n_points {
        let th = std::f64::consts::TAU * k as f64 / n_points as f64;
        let s0: State = pin + (e1 * th.cos() + e2 * th.sin()) * circle_radius;
        let mut stepper = Stepper::new(p, s0, 0.0, 1.0, *cfg);
        let mut best: Option<f64> = None;
        while stepper.time() < t_max {
            let s = match stepper.step(t_max) {
                Ok(_) => stepper.state(),
                Err(_) => break,
            };
            if s.norm() > cfg.escape_radius {
                break;
            }
            let rel = s - pout;
            if rel.norm() < local_radius {
                let d = normal.dot(&rel).abs();
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }
        if let Some(d) = best {
            dists.push(d);
        }
    }
    dists.sort_by(f64::total_cmp);
    Ok(CoincidenceReport {
        circle_radius,
        local_radius,
        n_points,
        reached: dists.len(),
        min_plane_distance: dists.first().copied(),
        median_plane_distance: dists.get(dists.len() / 2).copied(),
    })
}
