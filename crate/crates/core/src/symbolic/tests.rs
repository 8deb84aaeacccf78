use std::sync::OnceLock;

use super::*;
use crate::dynamics::{convert_classical, ClassicalParams};
use crate::section::{first_return, SectionPoint};
use crate::Params;

struct Setup {
    p: Params,
    seq: Vec<SectionPoint>,
    model: PartitionModel,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let p = convert_classical(ClassicalParams {
            A: 0.2,
            B: 0.2,
            C: 5.7,
        })
        .unwrap()
        .params;
        let seq = attractor_returns(&p, 1500, 300.0, &orbit_integrator()).unwrap();
        let pairs: Vec<_> = seq.windows(2).map(|w| (w[0].u, w[1].u)).collect();
        let model = calibrate_from_pairs(&pairs).unwrap();
        Setup { p, seq, model }
    })
}

fn solve(word: &str, model: &PartitionModel) -> PeriodicOrbit {
    let s = setup();
    let w = SymbolWord::parse(word).unwrap();
    let seeds = close_return_seeds(&s.seq, &w, model, 5);
    find_periodic_orbit(&s.p, &w, &seeds, model, &OrbitOptions::default()).unwrap()
}

#[test]
fn fold_is_interior_and_stable() {
    let s = setup();
    let m = s.model;
    assert!(m.u_c > m.u_range[0] && m.u_c < m.u_range[1]);
    let half: Vec<_> = s.seq[..750].windows(2).map(|w| (w[0].u, w[1].u)).collect();
    let coarse = calibrate_from_pairs(&half).unwrap();
    assert!((coarse.u_c - m.u_c).abs() < 1e-2, "{} vs {}", coarse.u_c, m.u_c);
}

#[test]
fn shift_property_on_samples() {
    let s = setup();
    let cfg = orbit_integrator();
    for q in s.seq.iter().step_by(97).take(8) {
        let full = itinerary(&s.p, q, 8, &s.model, 200.0, &cfg).unwrap();
        let next = first_return(&s.p, q, 200.0, &cfg).unwrap().out_point;
        let tail = itinerary(&s.p, &next, 7, &s.model, 200.0, &cfg).unwrap();
        assert_eq!(&full.symbols()[1..], tail.symbols());
    }
}

#[test]
fn period_one_orbit() {
    let s = setup();
    let o = solve("1", &s.model);
    assert!(o.is_verified());
    assert!(o.residual <= 1e-10);
    assert_eq!(o.unstable_count(), 1);
    assert!(o.closure_error < 1e-7);
    let q = SectionPoint::new(&s.p, o.points[0][0], o.points[0][1]);
    let it = itinerary(&s.p, &q, 5, &s.model, 200.0, &orbit_integrator()).unwrap();
    assert_eq!(it.to_string(), "11111");
    let rel = (o.multiplier_product() - o.jacobian_det_product).abs() / o.jacobian_det_product.abs();
    assert!(rel < 1e-6);
    // Newton restarted on its own solution
    let again = find_periodic_orbit(
        &s.p,
        &o.word,
        std::slice::from_ref(&o.points),
        &s.model,
        &OrbitOptions::default(),
    )
    .unwrap();
    assert!(again.iterations <= 2);
}

#[test]
fn period_three_reproduces_word() {
    let s = setup();
    let o = solve("112", &s.model);
    assert!(o.is_verified() && o.min_separation >= 1e-6);
    let q = SectionPoint::new(&s.p, o.points[0][0], o.points[0][1]);
    let it = itinerary(&s.p, &q, 9, &s.model, 200.0, &orbit_integrator()).unwrap();
    assert_eq!(it.to_string(), "112112112");
    let rel = (o.multiplier_product() - o.jacobian_det_product).abs() / o.jacobian_det_product.abs();
    assert!(rel < 1e-6);
}

#[test]
fn mirrored_labels_find_same_orbit() {
    let s = setup();
    let a = solve("12", &s.model);
    let b = solve("21", &s.model.mirrored());
    assert!(a.is_verified() && b.is_verified());
    for x in &a.points {
        assert!(b
            .points
            .iter()
            .any(|y| (x[0] - y[0]).hypot(x[1] - y[1]) < 1e-8));
    }
}

#[test]
fn wrong_itinerary_is_labelled() {
    let s = setup();
    // points just right of the fold still fall onto the period-one orbit, which lies left of it
    let w = SymbolWord::parse("2").unwrap();
    let seeds = close_return_seeds(&s.seq, &w, &s.model, 3);
    match find_periodic_orbit(&s.p, &w, &seeds, &s.model, &OrbitOptions::default()) {
        Ok(o) => assert_eq!(o.status, OrbitStatus::WrongItinerary),
        Err(e) => assert!(matches!(e, OrbitError::NoConvergence { .. } | OrbitError::NoSeed(_))),
    }
    let non_minimal = SymbolWord::parse("1212").unwrap();
    assert!(matches!(
        find_periodic_orbit(&s.p, &non_minimal, &[], &s.model, &OrbitOptions::default()),
        Err(OrbitError::Word(_))
    ));
}

#[test]
fn persistence_zero_and_small_steps() {
    let s = setup();
    let o = solve("1", &s.model);
    let zero = persistence_check(&o, &s.model, &[[0.0; 3]], &PersistenceOptions::default());
    assert!(zero.preserved);
    assert_eq!(zero.steps[0].point, o.points[0]);
    assert_eq!(zero.steps[0].index, zero.base_index);
    let sched = [[1e-6, 0.0, 0.0], [1e-5, 0.0, 1e-5]];
    let r = persistence_check(&o, &s.model, &sched, &PersistenceOptions::default());
    assert!(r.failure.is_none());
    assert!(r.preserved, "{r:?}");
    assert_eq!(r.base_index, Some(1));
}
