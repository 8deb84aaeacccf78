use rossler_knots::manifolds::{
    find_trefoil_candidate, heteroclinic_mismatch, BroydenOptions, LambdaOptions,
    MismatchOptions, Pairing, ParamAxis, SearchOptions, SearchOutcome, TrefoilSearch,
};
use rossler_knots::section::grid_coord;
use rossler_knots::{Execution, Params};
use serde::Serialize;
use serde_json::json;

use super::project_options;
use crate::config::RunConfig;
use crate::report::{csv_f64, csv_str, to_value, Artifacts, Csv, Report};
use crate::CliError;

/// Share of finite nodes below which the scan is flagged.
pub const MIN_FINITE_FRACTION: f64 = 0.6;
/// A jump is large when it exceeds this multiple of the median adjacent jump.
pub const JUMP_FACTOR: f64 = 10.0;
pub const BISECTION_DEPTH: usize = 6;
/// Change in a branch's first-crossing time that marks a lap change rather than drift.
pub const LAP_JUMP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeValue {
    pub mismatch: [f64; 2],
    pub norm: f64,
    pub pairing: Pairing,
    pub n_u: usize,
    pub n_l: usize,
    /// `L_p` crossings before `U_p` on the unstable and the stable branch.
    pub lower: [usize; 2],
    /// Branch times of the two `U_p` crossings.
    pub times: [f64; 2],
}

impl NodeValue {
    fn signature(&self) -> (Pairing, usize, [usize; 2]) {
        (self.pairing, self.n_u, self.lower)
    }

    fn lap_change(&self, o: &NodeValue) -> bool {
        (self.times[0] - o.times[0]).abs() + (self.times[1] - o.times[1]).abs() > LAP_JUMP
    }

    fn jump(&self, o: &NodeValue) -> f64 {
        (self.mismatch[0] - o.mismatch[0]).hypot(self.mismatch[1] - o.mismatch[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpVerdict {
    /// The jump shrinks below the threshold under bisection.
    Continuous,
    /// Pairing or crossing counts change, a crossing moves to another lap, or an evaluation
    /// fails inside the interval.
    Boundary,
    /// The jump persists at the finest bisection level with no change of signature.
    Unexplained,
}

#[derive(Debug, Clone, Serialize)]
pub struct LargeJump {
    pub from: [usize; 2],
    pub to: [usize; 2],
    pub jump: f64,
    pub verdict: JumpVerdict,
    /// Parameter interval the verdict was localized to.
    pub interval: [[f64; 3]; 2],
    pub evaluations: usize,
}

fn axis_name(a: ParamAxis) -> &'static str {
    match a {
        ParamAxis::A => "a",
        ParamAxis::B => "b",
        ParamAxis::C => "c",
    }
}

fn evaluate(p: Option<Params>, opts: &MismatchOptions) -> Result<NodeValue, String> {
    let p = p.ok_or_else(|| "parameters not representable".to_string())?;
    let d = heteroclinic_mismatch(&p, opts).map_err(|e| e.to_string())?;
    if !d.mismatch_norm.is_finite() {
        return Err("non-finite mismatch".into());
    }
    Ok(NodeValue {
        mismatch: d.mismatch,
        norm: d.mismatch_norm,
        pairing: d.pairing,
        n_u: d.n_u,
        n_l: d.n_l,
        lower: [d.out_crossing.lower_points.len(), d.in_crossing.lower_points.len()],
        times: [d.out_crossing.time, d.in_crossing.time],
    })
}

fn lerp(a: &Params, b: &Params, t: f64) -> Option<Params> {
    Params::new(
        a.a + t * (b.a - a.a),
        a.b + t * (b.b - a.b),
        a.c + t * (b.c - a.c),
    )
    .ok()
}

/// Bisects between two finite nodes until the jump falls below `threshold`, the signature
/// changes, or the depth runs out.
fn classify_jump(
    lo: (Params, NodeValue),
    hi: (Params, NodeValue),
    threshold: f64,
    depth: usize,
    opts: &MismatchOptions,
    evals: &mut usize,
) -> (JumpVerdict, [Params; 2]) {
    if lo.1.signature() != hi.1.signature() {
        return (JumpVerdict::Boundary, [lo.0, hi.0]);
    }
    if lo.1.jump(&hi.1) <= threshold {
        return (JumpVerdict::Continuous, [lo.0, hi.0]);
    }
    if depth == 0 {
        let v = if lo.1.lap_change(&hi.1) {
            JumpVerdict::Boundary
        } else {
            JumpVerdict::Unexplained
        };
        return (v, [lo.0, hi.0]);
    }
    let Some(mid) = lerp(&lo.0, &hi.0, 0.5) else {
        return (JumpVerdict::Boundary, [lo.0, hi.0]);
    };
    *evals += 1;
    let m = match evaluate(Some(mid), opts) {
        Ok(v) => v,
        Err(_) => return (JumpVerdict::Boundary, [lo.0, hi.0]),
    };
    let left = classify_jump(lo, (mid, m.clone()), threshold, depth - 1, opts, evals);
    if left.0 != JumpVerdict::Continuous {
        return left;
    }
    classify_jump((mid, m), hi, threshold, depth - 1, opts, evals)
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

struct Grid {
    x_axis: ParamAxis,
    y_axis: ParamAxis,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

fn read_grid(cfg: &RunConfig) -> Result<Grid, CliError> {
    let axis = |key: &str, default: ParamAxis| match cfg.get(key) {
        Some(s) => ParamAxis::parse(s).ok_or_else(|| CliError::Config(format!("{key}: expected a, b or c"))),
        None => Ok(default),
    };
    let x_axis = axis("x_axis", ParamAxis::A)?;
    let y_axis = axis("y_axis", ParamAxis::C)?;
    if x_axis == y_axis {
        return Err(CliError::Config("x_axis and y_axis must differ".into()));
    }
    let (x0, x1) = (cfg.f64_or("x_min", 0.1)?, cfg.f64_or("x_max", 0.9)?);
    let (y0, y1) = (cfg.f64_or("y_min", 1.5)?, cfg.f64_or("y_max", 3.3)?);
    let (nx, ny) = (cfg.usize_or("nx", 40)?, cfg.usize_or("ny", 40)?);
    if !(x1 >= x0 && y1 >= y0) {
        return Err(CliError::Config("grid bounds must satisfy min <= max".into()));
    }
    if nx > 10_000 || ny > 10_000 {
        return Err(CliError::Config("at most 10000 nodes per axis".into()));
    }
    Ok(Grid {
        x_axis,
        y_axis,
        xs: (0..nx).map(|i| grid_coord(x0, x1, i, nx)).collect(),
        ys: (0..ny).map(|j| grid_coord(y0, y1, j, ny)).collect(),
    })
}

/// Grid nodes whose mismatch is no larger than at any finite neighbour, best first.
fn local_minima(values: &[Result<NodeValue, String>], nx: usize, ny: usize) -> Vec<usize> {
    let norm = |k: usize| values[k].as_ref().ok().map(|v| v.norm);
    let mut out: Vec<usize> = (0..values.len())
        .filter(|&k| {
            let Some(m) = norm(k) else { return false };
            let (i, j) = ((k % nx) as i64, (k / nx) as i64);
            (-1..=1).all(|dj| {
                (-1..=1).all(|di| {
                    let (a, b) = (i + di, j + dj);
                    if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        return true;
                    }
                    norm(b as usize * nx + a as usize).is_none_or(|o| m <= o)
                })
            })
        })
        .collect();
    out.sort_by(|&a, &b| norm(a).unwrap().total_cmp(&norm(b).unwrap()).then(a.cmp(&b)));
    out
}

pub fn scan(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let grid = read_grid(cfg)?;
    let refine = cfg.bool_or("refine", false)?;
    let refine_max = cfg.usize_or("refine_max", 3)?;
    let refine_tol = cfg.f64_or("refine_tol", 1e-10)?;
    let refine_iter = cfg.usize_or("refine_iter", 40)?;
    if !(refine_tol > 0.0) {
        return Err(CliError::Config("refine_tol must be positive".into()));
    }
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let base = cfg.params;
    let node_params = |i: usize, j: usize| {
        grid.x_axis
            .set(&base, grid.xs[i])
            .and_then(|p| grid.y_axis.set(&p, grid.ys[j]))
    };
    let opts = MismatchOptions {
        h: cfg.h,
        t_max: cfg.t_max,
        cfg: cfg.integrator,
        pairing: None,
        trapping: false,
    };
    let exec = Execution::default();
    let values: Vec<Result<NodeValue, String>> =
        exec.map_range(nx * ny, |k| evaluate(node_params(k % nx, k / nx), &opts));
    let finite = values.iter().filter(|v| v.is_ok()).count();
    let total = nx * ny;
    let finite_fraction = if total == 0 { 0.0 } else { finite as f64 / total as f64 };

    let mut csv = Csv::new(&[
        "i", "j", "x", "y", "a", "b", "c", "status", "mismatch_u", "mismatch_w", "mismatch_norm",
        "pairing", "n_u", "n_l", "error",
    ]);
    for (k, v) in values.iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        let p = node_params(i, j).map(|p| p.as_array()).unwrap_or([f64::NAN; 3]);
        let mut row = vec![
            i.to_string(),
            j.to_string(),
            csv_f64(grid.xs[i]),
            csv_f64(grid.ys[j]),
            csv_f64(p[0]),
            csv_f64(p[1]),
            csv_f64(p[2]),
        ];
        match v {
            Ok(n) => row.extend([
                "ok".into(),
                csv_f64(n.mismatch[0]),
                csv_f64(n.mismatch[1]),
                csv_f64(n.norm),
                csv_str(&n.pairing.label()),
                n.n_u.to_string(),
                n.n_l.to_string(),
                String::new(),
            ]),
            Err(e) => row.extend([
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                csv_str(e),
            ]),
        }
        csv.push(row);
    }

    // adjacent jumps along rows and columns
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i + 1 < nx {
                pairs.push((k, k + 1));
            }
            if j + 1 < ny {
                pairs.push((k, k + nx));
            }
        }
    }
    let finite_pairs: Vec<(usize, usize, f64)> = pairs
        .iter()
        .filter_map(|&(a, b)| match (&values[a], &values[b]) {
            (Ok(x), Ok(y)) => Some((a, b, x.jump(y))),
            _ => None,
        })
        .collect();
    let failure_edges = pairs.len() - finite_pairs.len();
    let mut jumps: Vec<f64> = finite_pairs.iter().map(|t| t.2).collect();
    let median_jump = median(&mut jumps);
    let threshold = median_jump.map(|m| JUMP_FACTOR * m);
    let large: Vec<(usize, usize, f64)> = match threshold {
        Some(t) => finite_pairs.iter().copied().filter(|x| x.2 > t).collect(),
        None => Vec::new(),
    };
    let classified: Vec<LargeJump> = exec.map(&large, |&(a, b, jump)| {
        let pa = node_params(a % nx, a / nx).expect("finite node");
        let pb = node_params(b % nx, b / nx).expect("finite node");
        let va = values[a].clone().expect("finite node");
        let vb = values[b].clone().expect("finite node");
        let mut evaluations = 0;
        let (verdict, iv) = classify_jump(
            (pa, va),
            (pb, vb),
            threshold.unwrap_or(f64::INFINITY),
            BISECTION_DEPTH,
            &opts,
            &mut evaluations,
        );
        LargeJump {
            from: [a % nx, a / nx],
            to: [b % nx, b / nx],
            jump,
            verdict,
            interval: [iv[0].as_array(), iv[1].as_array()],
            evaluations,
        }
    });
    let count = |v: JumpVerdict| classified.iter().filter(|c| c.verdict == v).count();
    let unexplained = count(JumpVerdict::Unexplained);

    let minima = local_minima(&values, nx, ny);
    let candidates: Vec<serde_json::Value> = minima
        .iter()
        .map(|&k| {
            let v = values[k].as_ref().expect("finite minimum");
            json!({
                "node": [k % nx, k / nx],
                "params": node_params(k % nx, k / nx).map(|p| p.as_array()),
                "mismatch_norm": v.norm,
                "pairing": v.pairing.label(),
                "n_u": v.n_u,
                "n_l": v.n_l,
            })
        })
        .collect();

    let mut diagnostics = Vec::new();
    let mut refinements = Vec::new();
    if refine {
        let search = SearchOptions {
            free: [grid.x_axis, grid.y_axis],
            broyden: BroydenOptions {
                tol: refine_tol,
                max_iter: refine_iter,
                ..BroydenOptions::default()
            },
            mismatch: MismatchOptions {
                trapping: true,
                ..opts
            },
            lambda: LambdaOptions {
                h: cfg.h,
                t_max: cfg.t_max,
                cfg: cfg.integrator,
                ..LambdaOptions::default()
            },
            radius: None,
            project: project_options(cfg, [0.0, 0.0, 1.0]),
        };
        let starts: Vec<usize> = minima.iter().copied().take(refine_max).collect();
        let results: Vec<Result<TrefoilSearch, String>> = exec.map(&starts, |&k| {
            let p = node_params(k % nx, k / nx).expect("finite minimum");
            find_trefoil_candidate(&p, &search).map_err(|e| e.to_string())
        });
        for (k, r) in starts.iter().zip(results) {
            let node = [k % nx, k / nx];
            match r {
                Ok(s) => {
                    let converged = !matches!(s.outcome, SearchOutcome::NoConvergence { .. });
                    let residual = s.diagnostics.as_ref().map(|d| d.mismatch_norm);
                    if converged {
                        if residual.is_none_or(|r| !(r <= refine_tol)) {
                            diagnostics.push(format!(
                                "refinement from node {node:?} converged with |mismatch| {residual:?} above {refine_tol:e}"
                            ));
                        }
                        if s.lambda.as_ref().is_none_or(|l| l.polynomial.is_none()) {
                            diagnostics.push(format!(
                                "refinement from node {node:?} converged without a Λ certificate"
                            ));
                        }
                    }
                    refinements.push(json!({
                        "node": node,
                        "converged": converged,
                        "mismatch_norm": residual,
                        "n_u": s.diagnostics.as_ref().map(|d| d.n_u),
                        "n_l": s.diagnostics.as_ref().map(|d| d.n_l),
                        "search": to_value(&s),
                    }));
                }
                Err(e) => refinements.push(json!({"node": node, "converged": false, "error": e})),
            }
        }
    }
    if total > 0 && finite_fraction < MIN_FINITE_FRACTION {
        diagnostics.push(format!(
            "mismatch finite on {:.1}% of nodes, below {:.0}%",
            100.0 * finite_fraction,
            100.0 * MIN_FINITE_FRACTION
        ));
    }
    if unexplained > 0 {
        diagnostics.push(format!("{unexplained} adjacent jumps persist under bisection"));
    }
    let results = json!({
        "grid": {
            "x_axis": axis_name(grid.x_axis),
            "y_axis": axis_name(grid.y_axis),
            "x": grid.xs,
            "y": grid.ys,
            "fixed": base.as_array(),
        },
        "nodes": total,
        "finite": finite,
        "finite_fraction": finite_fraction,
        "continuity": {
            "adjacent_pairs": pairs.len(),
            "finite_pairs": finite_pairs.len(),
            "failure_edges": failure_edges,
            "median_jump": median_jump,
            "threshold": threshold,
            "large_jumps": to_value(&classified),
            "continuous": count(JumpVerdict::Continuous),
            "boundaries": count(JumpVerdict::Boundary),
            "unexplained": unexplained,
        },
        "local_minima": candidates,
        "refinements": refinements,
    });
    let mut art = Artifacts::report(Report::new("scan", cfg, results, diagnostics));
    art.csv = Some(csv);
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(norm: f64) -> Result<NodeValue, String> {
        Ok(NodeValue {
            mismatch: [norm, 0.0],
            norm,
            pairing: Pairing::BOUNDED,
            n_u: 1,
            n_l: 1,
            lower: [1, 0],
            times: [10.0, -10.0],
        })
    }

    #[test]
    fn minima_on_small_grid() {
        let v = vec![node(3.0), node(2.0), node(3.0), node(4.0), Err("x".into()), node(0.5)];
        assert_eq!(local_minima(&v, 3, 2), vec![5]);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut []), None);
    }
}
