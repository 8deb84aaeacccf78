use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::lambda::{attractor_radius, build_lambda_knot, LambdaOptions, CLOSURE_FACTOR};
use super::{heteroclinic_mismatch, HeteroclinicDiagnostics, ManifoldError, MismatchOptions, Pairing};
use crate::dynamics::Params;
use crate::knot::{Certificate, KnotClass, ProjectOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamAxis {
    A,
    B,
    C,
}

impl ParamAxis {
    pub fn get(self, p: &Params) -> f64 {
        match self {
            ParamAxis::A => p.a,
            ParamAxis::B => p.b,
            ParamAxis::C => p.c,
        }
    }

    pub fn set(self, p: &Params, v: f64) -> Option<Params> {
        let (mut a, mut b, mut c) = (p.a, p.b, p.c);
        match self {
            ParamAxis::A => a = v,
            ParamAxis::B => b = v,
            ParamAxis::C => c = v,
        }
        Params::new(a, b, c).ok()
    }

    pub fn parse(s: &str) -> Option<ParamAxis> {
        match s {
            "a" => Some(ParamAxis::A),
            "b" => Some(ParamAxis::B),
            "c" => Some(ParamAxis::C),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroydenOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Forward-difference step, relative to `1 + |x_k|`.
    pub fd_step: f64,
    /// Cap on the Euclidean length of one step.
    pub max_step: f64,
    pub max_halvings: usize,
}

impl Default for BroydenOptions {
    fn default() -> Self {
        BroydenOptions {
            tol: 1e-8,
            max_iter: 40,
            fd_step: 1e-6,
            max_step: 0.05,
            max_halvings: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroydenResult {
    pub x: [f64; 2],
    pub fx: [f64; 2],
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reason: Option<String>,
    /// `(x, |f(x)|)` after every accepted step, starting with the seed.
    pub history: Vec<([f64; 2], f64)>,
}

fn fd_jacobian(
    f: &dyn Fn([f64; 2]) -> Option<[f64; 2]>,
    x: [f64; 2],
    fx: [f64; 2],
    step: f64,
) -> Option<Matrix2<f64>> {
    let mut j = Matrix2::zeros();
    for k in 0..2 {
        let h = step * (1.0 + x[k].abs());
        let mut xp = x;
        xp[k] += h;
        let fp = f(xp)?;
        j[(0, k)] = (fp[0] - fx[0]) / h;
        j[(1, k)] = (fp[1] - fx[1]) / h;
    }
    Some(j)
}

/// Damped Broyden iteration for a two-dimensional root.
///
/// `f` returning `None` counts as a failed trial point and triggers step halving.
pub fn broyden_solve(
    f: &dyn Fn([f64; 2]) -> Option<[f64; 2]>,
    x0: [f64; 2],
    opts: &BroydenOptions,
) -> BroydenResult {
    let norm = |v: [f64; 2]| v[0].hypot(v[1]);
    let Some(mut fx) = f(x0) else {
        return BroydenResult {
            x: x0,
            fx: [f64::NAN; 2],
            norm: f64::NAN,
            iterations: 0,
            converged: false,
            reason: Some("objective undefined at the seed".into()),
            history: Vec::new(),
        };
    };
    let mut x = x0;
    let mut history = vec![(x, norm(fx))];
    let mut j: Option<Matrix2<f64>> = None;
    let mut fresh = false;
    let mut iterations = 0;
    let mut reason = None;
    while norm(fx) > opts.tol {
        if iterations >= opts.max_iter {
            reason = Some(format!("no convergence after {iterations} iterations"));
            break;
        }
        let jac = match j {
            Some(m) => m,
            None => match fd_jacobian(f, x, fx, opts.fd_step) {
                Some(m) => {
                    fresh = true;
                    m
                }
                None => {
                    reason = Some("objective undefined next to the iterate".into());
                    break;
                }
            },
        };
        let Some(dx) = jac.lu().solve(&-Vector2::from(fx)) else {
            if fresh {
                reason = Some("singular Jacobian".into());
                break;
            }
            j = None;
            continue;
        };
        let mut dx = dx;
        if dx.norm() > opts.max_step {
            dx *= opts.max_step / dx.norm();
        }
        iterations += 1;
        let mut accepted = None;
        let mut lambda = 1.0;
        for _ in 0..=opts.max_halvings {
            let xt = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Some(ft) = f(xt) {
                if norm(ft) < norm(fx) {
                    accepted = Some((xt, ft));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xt, ft)) => {
                let s = Vector2::new(xt[0] - x[0], xt[1] - x[1]);
                let y = Vector2::new(ft[0] - fx[0], ft[1] - fx[1]);
                let upd = (y - jac * s) * s.transpose() / s.dot(&s);
                j = Some(jac + upd);
                fresh = false;
                x = xt;
                fx = ft;
                history.push((x, norm(fx)));
            }
            None if fresh => {
                reason = Some("no decrease along the damped step".into());
                break;
            }
            // a stale secant model: rebuild it by differences and retry
            None => j = None,
        }
    }
    BroydenResult {
        x,
        fx,
        norm: norm(fx),
        iterations,
        converged: reason.is_none(),
        reason,
        history,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub free: [ParamAxis; 2],
    pub broyden: BroydenOptions,
    pub mismatch: MismatchOptions,
    pub lambda: LambdaOptions,
    /// Closure radius for `Λ`; `None` uses ten attractor radii.
    pub radius: Option<f64>,
    pub project: ProjectOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            free: [ParamAxis::B, ParamAxis::C],
            broyden: BroydenOptions::default(),
            mismatch: MismatchOptions::default(),
            lambda: LambdaOptions::default(),
            radius: None,
            project: ProjectOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SearchOutcome {
    /// Converged and every trefoil-parameter diagnostic holds.
    Candidate,
    /// Converged, but some diagnostics fail.
    DiagnosticsFail { reasons: Vec<String> },
    NoConvergence { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub radius: f64,
    pub vertices: usize,
    pub theta_gap: f64,
    pub polynomial: Option<String>,
    pub class: Option<String>,
    pub crossings: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrefoilSearch {
    pub outcome: SearchOutcome,
    pub start: Params,
    pub params: Params,
    pub free: [ParamAxis; 2],
    pub pairing: Option<Pairing>,
    pub iterations: usize,
    pub history: Vec<([f64; 3], f64)>,
    pub diagnostics: Option<HeteroclinicDiagnostics>,
    pub lambda: Option<LambdaSummary>,
}

/// Closure radius, `Λ`, and its certificate for given diagnostics.
pub fn lambda_summary(
    p: &Params,
    diag: &HeteroclinicDiagnostics,
    radius: Option<f64>,
    lambda: &LambdaOptions,
    project: &ProjectOptions,
) -> (LambdaSummary, Option<Certificate>) {
    let radius = radius.unwrap_or_else(|| {
        let r = attractor_radius(p, &lambda.cfg).unwrap_or_else(|| {
            diag.out_crossing
                .state
                .iter()
                .chain(diag.in_crossing.state.iter())
                .fold(1.0f64, |m, v| m.max(v.abs()))
        });
        CLOSURE_FACTOR * r
    });
    let mut summary = LambdaSummary {
        radius,
        vertices: 0,
        theta_gap: f64::NAN,
        polynomial: None,
        class: None,
        crossings: None,
        error: None,
    };
    let knot = match build_lambda_knot(p, diag, radius, lambda) {
        Ok(k) => k,
        Err(e) => {
            summary.error = Some(e.to_string());
            return (summary, None);
        }
    };
    summary.vertices = knot.vertices.len();
    summary.theta_gap = knot.theta_gap;
    match knot.knot().and_then(|k| Certificate::of_knot(&k, project)) {
        Ok(c) => {
            summary.polynomial = Some(c.polynomial.clone());
            summary.class = Some(c.label.clone());
            summary.crossings = Some(c.crossings_reduced);
            (summary, Some(c))
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            (summary, None)
        }
    }
}

/// Drives the heteroclinic mismatch to zero over two free parameters.
///
/// The branch pairing is chosen at the seed and frozen. Convergence is followed by the
/// full diagnostics: single `U_p`/`L_p` crossings and a trefoil-compatible `Λ`.
pub fn find_trefoil_candidate(
    p0: &Params,
    opts: &SearchOptions,
) -> Result<TrefoilSearch, ManifoldError> {
    let [ax, ay] = opts.free;
    if ax == ay {
        return Err(ManifoldError::Setup("the two free parameters must differ".into()));
    }
    let mut search = TrefoilSearch {
        outcome: SearchOutcome::NoConvergence {
            reason: String::new(),
        },
        start: *p0,
        params: *p0,
        free: opts.free,
        pairing: None,
        iterations: 0,
        history: Vec::new(),
        diagnostics: None,
        lambda: None,
    };
    let quick = MismatchOptions {
        trapping: false,
        ..opts.mismatch
    };
    let seed_diag = match heteroclinic_mismatch(p0, &quick) {
        Ok(d) => d,
        Err(e) => {
            search.outcome = SearchOutcome::NoConvergence {
                reason: format!("mismatch undefined at the seed: {e}"),
            };
            return Ok(search);
        }
    };
    let pairing = seed_diag.pairing;
    search.pairing = Some(pairing);
    let frozen = MismatchOptions {
        pairing: Some(pairing),
        ..quick
    };
    let at = |x: [f64; 2]| ax.set(p0, x[0]).and_then(|p| ay.set(&p, x[1]));
    let f = |x: [f64; 2]| -> Option<[f64; 2]> {
        let p = at(x)?;
        heteroclinic_mismatch(&p, &frozen).ok().map(|d| d.mismatch)
    };
    let res = broyden_solve(&f, [ax.get(p0), ay.get(p0)], &opts.broyden);
    search.iterations = res.iterations;
    search.history = res
        .history
        .iter()
        .filter_map(|(x, n)| at(*x).map(|p| (p.as_array(), *n)))
        .collect();
    let Some(p) = at(res.x) else {
        search.outcome = SearchOutcome::NoConvergence {
            reason: "iterate left the parameter domain".into(),
        };
        return Ok(search);
    };
    search.params = p;
    let full = MismatchOptions {
        pairing: Some(pairing),
        ..opts.mismatch
    };
    let diag = heteroclinic_mismatch(&p, &full).ok();
    if !res.converged {
        search.diagnostics = diag;
        search.outcome = SearchOutcome::NoConvergence {
            reason: res.reason.unwrap_or_default(),
        };
        return Ok(search);
    }
    let Some(diag) = diag else {
        search.outcome = SearchOutcome::NoConvergence {
            reason: "diagnostics failed at the converged parameters".into(),
        };
        return Ok(search);
    };
    let mut reasons = Vec::new();
    if !p.in_range() {
        reasons.push("parameters outside a, b in (0, 1), c > 1".to_string());
    }
    if diag.n_u != 1 {
        reasons.push(format!("n_U = {}", diag.n_u));
    }
    if diag.n_l != 1 {
        reasons.push(format!("n_L = {}", diag.n_l));
    }
    let (summary, cert) = lambda_summary(&p, &diag, opts.radius, &opts.lambda, &opts.project);
    match &cert {
        Some(c) if c.class == KnotClass::TrefoilCompatible => {}
        Some(c) => reasons.push(format!("Λ is {}", c.label)),
        None => reasons.push(format!(
            "Λ not certified: {}",
            summary.error.clone().unwrap_or_default()
        )),
    }
    search.lambda = Some(summary);
    search.diagnostics = Some(diag);
    search.outcome = if reasons.is_empty() {
        SearchOutcome::Candidate
    } else {
        SearchOutcome::DiagnosticsFail { reasons }
    };
    Ok(search)
}
