use std::sync::OnceLock;

use super::*;
use crate::dynamics::{convert_classical, ClassicalParams, IntegratorConfig};
use crate::knot::ProjectOptions;
use crate::section::SectionPoint;

/// A parameter set where every branch reaches `U_p` and both unbounded branches escape.
fn grid_point() -> Params {
    Params::new(0.5, 0.3, 2.5).unwrap()
}

fn diag() -> &'static HeteroclinicDiagnostics {
    static D: OnceLock<HeteroclinicDiagnostics> = OnceLock::new();
    D.get_or_init(|| heteroclinic_mismatch(&grid_point(), &MismatchOptions::default()).unwrap())
}

fn dist(a: &SectionPoint, b: &SectionPoint) -> f64 {
    (a.u - b.u).hypot(a.w - b.w)
}

#[test]
fn seeds_are_eigenvectors() {
    let classical = convert_classical(ClassicalParams {
        A: 0.2,
        B: 0.2,
        C: 5.7,
    })
    .unwrap()
    .params;
    for p in [grid_point(), classical] {
        for kind in BranchKind::ALL {
            let s = branch_seed(&p, kind, 1e-6).unwrap();
            assert!(s.eigen_residual <= EIGEN_RESIDUAL_LIMIT, "{kind:?} {}", s.eigen_residual);
            let v = nalgebra::Vector3::from(s.direction);
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert_eq!(s.eigenvalue < 0.0, kind.is_stable_in());
        }
    }
    assert!(matches!(
        branch_seed(&grid_point(), BranchKind::WsInPlus, 1e-3),
        Err(ManifoldError::SeedOffset(_))
    ));
}

#[test]
fn branch_sides_follow_convention() {
    let p = grid_point();
    let (_, pout) = p.fixed_points().unwrap();
    let s = branch_seed(&p, BranchKind::WsInPlus, 1e-6).unwrap().point();
    assert!(s.z > 0.0);
    let s = branch_seed(&p, BranchKind::WuOutPlus, 1e-6).unwrap().point();
    assert!(s.y > pout.y);
}

#[test]
fn stable_branch_leaves_small_balls_backward() {
    let p = grid_point();
    let b = grow_branch(&p, BranchKind::WsInPlus, 1e-6, 50.0, &IntegratorConfig::default()).unwrap();
    let far = b.trajectory.states.iter().map(|s| s.norm()).fold(0.0, f64::max);
    assert!(far > 1e-2);
    assert!(b.trajectory.times.iter().all(|&t| t <= 0.0));
}

#[test]
fn crossing_moves_by_order_h() {
    let p = grid_point();
    let cfg = IntegratorConfig::default();
    for kind in [BranchKind::WuOutPlus, BranchKind::WsInPlus] {
        let c = |h| first_upper_crossing(&p, kind, h, 200.0, &cfg).unwrap().point;
        let (a, b) = (c(2e-6), c(1e-6));
        assert!(dist(&a, &b) < 1e-3, "{kind:?}: {}", dist(&a, &b));
    }
}

#[test]
fn unbounded_branches_are_trapped() {
    let d = diag();
    let tin = d.trapping_in.as_ref().unwrap();
    let tout = d.trapping_out.as_ref().unwrap();
    assert!(tin.trapped && tout.trapped, "{tin:?} {tout:?}");
    assert!(tin.worst_tail_slack >= -TRAP_SLACK);
    assert!(tin.tail_samples > 1 && tout.tail_samples > 1);
}

#[test]
fn mismatch_is_deterministic_and_h_stable() {
    let p = grid_point();
    let opts = MismatchOptions {
        trapping: false,
        ..MismatchOptions::default()
    };
    let a = heteroclinic_mismatch(&p, &opts).unwrap();
    let b = heteroclinic_mismatch(&p, &opts).unwrap();
    assert_eq!(a.mismatch, b.mismatch);
    let half = heteroclinic_mismatch(&p, &MismatchOptions { h: 5e-7, ..opts }).unwrap();
    assert_eq!(half.pairing, a.pairing);
    let dm = (a.mismatch[0] - half.mismatch[0]).hypot(a.mismatch[1] - half.mismatch[1]);
    assert!(dm < 1e-3, "{dm}");
    assert_eq!(a.mismatch_norm, a.mismatch[0].hypot(a.mismatch[1]));
}

#[test]
fn crossing_counts_stable_under_tolerance_halving() {
    let p = grid_point();
    let opts = MismatchOptions {
        trapping: false,
        pairing: Some(diag().pairing),
        ..MismatchOptions::default()
    };
    let fine = MismatchOptions {
        cfg: IntegratorConfig::with_tol(5e-11).unwrap(),
        ..opts
    };
    let a = heteroclinic_mismatch(&p, &opts).unwrap();
    let b = heteroclinic_mismatch(&p, &fine).unwrap();
    assert_eq!((a.n_u, a.n_l), (b.n_u, b.n_l));
}

#[test]
fn lambda_is_closed_simple_and_radius_stable() {
    let p = grid_point();
    let d = diag();
    let r = CLOSURE_FACTOR * attractor_radius(&p, &IntegratorConfig::default()).unwrap();
    let opts = LambdaOptions::default();
    let k1 = build_lambda_knot(&p, d, r, &opts).unwrap();
    assert_eq!(k1.vertices.first(), k1.vertices.last());
    assert!(k1.min_spacing > 0.0);
    let poly = k1.knot().unwrap();
    assert!(poly.is_simple(crate::Execution::default()));
    let (s1, c1) = lambda_summary(&p, d, Some(r), &opts, &ProjectOptions::default());
    let (s2, c2) = lambda_summary(&p, d, Some(2.0 * r), &opts, &ProjectOptions::default());
    assert!(s1.error.is_none() && s2.error.is_none());
    assert!(c1.unwrap().same_polynomial(&c2.unwrap()));
    assert!(matches!(
        build_lambda_knot(&p, d, 1e5, &opts),
        Err(ManifoldError::Setup(_))
    ));
}

#[test]
fn broyden_on_a_known_root() {
    let f = |x: [f64; 2]| Some([x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]]);
    let opts = BroydenOptions {
        tol: 1e-12,
        ..BroydenOptions::default()
    };
    let r = broyden_solve(&f, [1.0, 0.5], &opts);
    assert!(r.converged);
    let s = 0.5f64.sqrt();
    assert!((r.x[0] - s).abs() < 1e-10 && (r.x[1] - s).abs() < 1e-10);
    let again = broyden_solve(&f, r.x, &opts);
    assert_eq!(again.iterations, 0);
    let perturbed = broyden_solve(&f, [r.x[0] + 1e-3, r.x[1] - 1e-3], &opts);
    assert!((perturbed.x[0] - r.x[0]).abs() < 1e-6 && (perturbed.x[1] - r.x[1]).abs() < 1e-6);
    let none = broyden_solve(&|_| None, [0.0, 0.0], &opts);
    assert!(!none.converged && none.iterations == 0);
}

#[test]
fn search_setup_and_labelled_failure() {
    let p = grid_point();
    let same = SearchOptions {
        free: [ParamAxis::B, ParamAxis::B],
        ..SearchOptions::default()
    };
    assert!(matches!(find_trefoil_candidate(&p, &same), Err(ManifoldError::Setup(_))));
    let short = SearchOptions {
        broyden: BroydenOptions {
            max_iter: 2,
            ..BroydenOptions::default()
        },
        ..SearchOptions::default()
    };
    let r = find_trefoil_candidate(&p, &short).unwrap();
    assert!(matches!(r.outcome, SearchOutcome::NoConvergence { .. }));
    assert_eq!(r.iterations, 2);
    assert!(r.history.last().unwrap().1 < r.history[0].1);
}
