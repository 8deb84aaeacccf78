use serde::{Deserialize, Serialize};

use super::planar::{PlanarMap, Point};
use super::shooting::{solve_periodic, ShootingError, ShootingOptions, ShootingSolution};
use super::word::SymbolWord;

/// Minimum number of probe points per edge.
pub const MIN_EDGE_SAMPLES: usize = 500;
/// Fraction of failed evaluations above which a report is invalid.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// Quadrilateral with corners A (top left), B (top right), C (bottom left), D (bottom right).
///
/// `at(s, t)` is the bilinear patch with `s` running from the AC side to the BD side
/// and `t` from the CD side to the AB side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub a: Point,
    pub b: Point,
    pub c: Point,
    pub d: Point,
}

fn lerp(p: Point, q: Point, s: f64) -> Point {
    [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
}

impl Quad {
    pub fn axis_aligned(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Quad {
            a: [x0, y1],
            b: [x1, y1],
            c: [x0, y0],
            d: [x1, y0],
        }
    }

    pub fn at(&self, s: f64, t: f64) -> Point {
        lerp(lerp(self.c, self.d, s), lerp(self.a, self.b, s), t)
    }

    /// Sub-quad between `t0` and `t1`, spanning from the AC side to the BD side.
    pub fn band(&self, t0: f64, t1: f64) -> Quad {
        Quad {
            a: self.at(0.0, t1),
            b: self.at(1.0, t1),
            c: self.at(0.0, t0),
            d: self.at(1.0, t0),
        }
    }

    fn diameter(&self) -> f64 {
        let d = |p: Point, q: Point| (p[0] - q[0]).hypot(p[1] - q[1]);
        d(self.a, self.d).max(d(self.b, self.c))
    }

    /// Signed distance beyond the AB side (positive away from CD).
    fn beyond_ab(&self, x: Point) -> f64 {
        beyond(self.a, self.b, lerp(self.c, self.d, 0.5), x)
    }

    fn beyond_cd(&self, x: Point) -> f64 {
        beyond(self.c, self.d, lerp(self.a, self.b, 0.5), x)
    }
}

fn beyond(p: Point, q: Point, inside: Point, x: Point) -> f64 {
    let e = [q[0] - p[0], q[1] - p[1]];
    let len = e[0].hypot(e[1]);
    let mut n = [e[1] / len, -e[0] / len];
    let side = |y: Point| n[0] * (y[0] - p[0]) + n[1] * (y[1] - p[1]);
    if side(inside) > 0.0 {
        n = [-n[0], -n[1]];
    }
    n[0] * (x[0] - p[0]) + n[1] * (x[1] - p[1])
}

fn polyline(n: usize, f: impl Fn(f64) -> Point) -> Vec<Point> {
    (0..n).map(|i| f(i as f64 / (n - 1) as f64)).collect()
}

struct Probe {
    evaluated: usize,
    failed: usize,
}

impl Probe {
    fn image<M: PlanarMap + ?Sized>(&mut self, map: &M, pts: &[Point]) -> Vec<Point> {
        let mut out = Vec::with_capacity(pts.len());
        for &x in pts {
            self.evaluated += 1;
            match map.apply(x) {
                Some(y) if y[0].is_finite() && y[1].is_finite() => out.push(y),
                _ => self.failed += 1,
            }
        }
        out
    }
}

fn seg_intersection(p: Point, q: Point, r: Point, s: Point, tol: f64) -> Option<Point> {
    let d1 = [q[0] - p[0], q[1] - p[1]];
    let d2 = [s[0] - r[0], s[1] - r[1]];
    let den = d1[0] * d2[1] - d1[1] * d2[0];
    let w = [r[0] - p[0], r[1] - p[1]];
    if den != 0.0 {
        let t = (w[0] * d2[1] - w[1] * d2[0]) / den;
        let u = (w[0] * d1[1] - w[1] * d1[0]) / den;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            return Some(lerp(p, q, t));
        }
    }
    // touching within tolerance counts as meeting
    let closest = |a: Point, b: Point, x: Point| -> (f64, Point) {
        let e = [b[0] - a[0], b[1] - a[1]];
        let ee = e[0] * e[0] + e[1] * e[1];
        let t = if ee > 0.0 {
            (((x[0] - a[0]) * e[0] + (x[1] - a[1]) * e[1]) / ee).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = lerp(a, b, t);
        ((c[0] - x[0]).hypot(c[1] - x[1]), c)
    };
    [
        closest(r, s, p),
        closest(r, s, q),
        closest(p, q, r),
        closest(p, q, s),
    ]
    .into_iter()
    .filter(|(d, _)| *d <= tol)
    .map(|(_, c)| c)
    .next()
}

fn first_meeting(a: &[Point], b: &[Point], tol: f64) -> Option<Point> {
    for u in a.windows(2) {
        for v in b.windows(2) {
            if let Some(x) = seg_intersection(u[0], u[1], v[0], v[1], tol) {
                return Some(x);
            }
        }
    }
    None
}

/// Where the image of a strip edge sits relative to the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeSide {
    BeyondAb,
    BeyondCd,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripCrossing {
    pub strip: usize,
    pub pass: bool,
    /// Sides reached by the images of the CD-facing and AB-facing edges.
    pub edge_sides: [EdgeSide; 2],
    /// Image points of the mid-transversal where it leaves the rectangle across AB and CD.
    pub ab_witness: Option<Point>,
    pub cd_witness: Option<Point>,
    /// Edge image point furthest from the side it should have reached.
    pub worst_point: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripMeeting {
    pub image_of: usize,
    pub target: usize,
    pub pass: bool,
    /// Meeting points with the target's CD-facing and AB-facing edges.
    pub witnesses: [Option<Point>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeReport {
    pub rectangle: Quad,
    pub strips: Vec<Quad>,
    pub samples_per_edge: usize,
    pub probes: usize,
    pub failures: usize,
    pub valid: bool,
    pub crossings: Vec<StripCrossing>,
    pub meetings: Vec<StripMeeting>,
    pub condition_i: bool,
    pub condition_ii: bool,
    pub pass: bool,
}

/// Checks the two crossing conditions of a topological horseshoe on sampled polylines.
///
/// Each strip spans from the AC side to the BD side of `rect`. Condition (i) asks that the
/// image of every strip stretch across the rectangle from the AB side to the CD side;
/// condition (ii) that the image of each strip meet both strips.
pub fn verify_topological_horseshoe<M: PlanarMap + ?Sized>(
    map: &M,
    rect: &Quad,
    strips: &[Quad],
    samples_per_edge: usize,
) -> HorseshoeReport {
    let n = samples_per_edge.max(MIN_EDGE_SAMPLES);
    let tol = 1e-9 * rect.diameter();
    let mut probe = Probe {
        evaluated: 0,
        failed: 0,
    };
    // rectangle boundary evaluability is part of the precondition
    for (p, q) in [
        (rect.a, rect.b),
        (rect.b, rect.d),
        (rect.d, rect.c),
        (rect.c, rect.a),
    ] {
        probe.image(map, &polyline(n, |s| lerp(p, q, s)));
    }
    let side_of = |img: &[Point]| -> (EdgeSide, Option<Point>) {
        if img.is_empty() {
            return (EdgeSide::Neither, None);
        }
        let worst = |f: &dyn Fn(Point) -> f64| {
            img.iter()
                .copied()
                .min_by(|x, y| f(*x).total_cmp(&f(*y)))
                .map(|x| (f(x), x))
                .unwrap()
        };
        let (ab, wab) = worst(&|x| rect.beyond_ab(x));
        let (cd, wcd) = worst(&|x| rect.beyond_cd(x));
        if ab >= -tol {
            (EdgeSide::BeyondAb, None)
        } else if cd >= -tol {
            (EdgeSide::BeyondCd, None)
        } else {
            (EdgeSide::Neither, Some(if ab > cd { wab } else { wcd }))
        }
    };
    let mut crossings = Vec::new();
    let mut transversals = Vec::new();
    let mut long_edges = Vec::new();
    for (i, s) in strips.iter().enumerate() {
        let lower = polyline(n, |u| s.at(u, 0.0));
        let upper = polyline(n, |u| s.at(u, 1.0));
        probe.image(map, &polyline(n, |t| s.at(0.0, t)));
        probe.image(map, &polyline(n, |t| s.at(1.0, t)));
        let (lo_side, lo_worst) = side_of(&probe.image(map, &lower));
        let (up_side, up_worst) = side_of(&probe.image(map, &upper));
        let mid = probe.image(map, &polyline(n, |t| s.at(0.5, t)));
        let ab_line = [rect.a, rect.b];
        let cd_line = [rect.c, rect.d];
        let ab_witness = first_meeting(&mid, &ab_line, tol).or_else(|| {
            mid.iter()
                .copied()
                .find(|&x| rect.beyond_ab(x) >= -tol)
        });
        let cd_witness = first_meeting(&mid, &cd_line, tol).or_else(|| {
            mid.iter()
                .copied()
                .find(|&x| rect.beyond_cd(x) >= -tol)
        });
        let sides_ok = matches!(
            (lo_side, up_side),
            (EdgeSide::BeyondAb, EdgeSide::BeyondCd) | (EdgeSide::BeyondCd, EdgeSide::BeyondAb)
        );
        crossings.push(StripCrossing {
            strip: i,
            pass: sides_ok && ab_witness.is_some() && cd_witness.is_some(),
            edge_sides: [lo_side, up_side],
            ab_witness,
            cd_witness,
            worst_point: lo_worst.or(up_worst),
        });
        transversals.push(mid);
        long_edges.push([lower, upper]);
    }
    let mut meetings = Vec::new();
    for (i, mid) in transversals.iter().enumerate() {
        for (j, edges) in long_edges.iter().enumerate() {
            let witnesses = [
                first_meeting(mid, &edges[0], tol),
                first_meeting(mid, &edges[1], tol),
            ];
            meetings.push(StripMeeting {
                image_of: i,
                target: j,
                pass: witnesses.iter().all(Option::is_some),
                witnesses,
            });
        }
    }
    let valid = (probe.failed as f64) <= MAX_FAILURE_FRACTION * probe.evaluated as f64;
    let condition_i = !strips.is_empty() && crossings.iter().all(|c| c.pass);
    let condition_ii = !strips.is_empty() && meetings.iter().all(|m| m.pass);
    HorseshoeReport {
        rectangle: *rect,
        strips: strips.to_vec(),
        samples_per_edge: n,
        probes: probe.evaluated,
        failures: probe.failed,
        valid,
        crossings,
        meetings,
        condition_i,
        condition_ii,
        pass: valid && condition_i && condition_ii,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HorseshoeKind {
    /// The standard fold: the second strip is turned over.
    Folded,
    /// Both strips keep their orientation; the middle band wraps around the square.
    OrientationPreserving,
}

/// Exact affine horseshoe on the unit square with contraction 1/3 and expansion 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineHorseshoe {
    pub kind: HorseshoeKind,
}

const THIRD: f64 = 1.0 / 3.0;

impl AffineHorseshoe {
    pub fn folded() -> Self {
        AffineHorseshoe {
            kind: HorseshoeKind::Folded,
        }
    }

    pub fn orientation_preserving() -> Self {
        AffineHorseshoe {
            kind: HorseshoeKind::OrientationPreserving,
        }
    }

    pub fn rectangle() -> Quad {
        Quad::axis_aligned(0.0, 1.0, 0.0, 1.0)
    }

    pub fn strips() -> [Quad; 2] {
        let r = Self::rectangle();
        [r.band(0.0, THIRD), r.band(2.0 * THIRD, 1.0)]
    }

    pub fn symbol(x: Point) -> u8 {
        if x[1] < 0.5 {
            1
        } else {
            2
        }
    }

    pub fn itinerary(&self, x: Point, n: usize) -> Option<Vec<u8>> {
        let mut y = x;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(Self::symbol(y));
            y = self.apply(y)?;
        }
        Some(out)
    }

    /// Periodic orbit realizing `word`, seeded at the strip centres.
    pub fn periodic_orbit(&self, word: &SymbolWord) -> Result<ShootingSolution, ShootingError> {
        let seed: Vec<Point> = word
            .symbols()
            .iter()
            .map(|&s| if s == 1 { [0.5, THIRD / 2.0] } else { [0.5, 1.0 - THIRD / 2.0] })
            .collect();
        solve_periodic(
            self,
            &seed,
            &ShootingOptions {
                tol: 1e-13,
                ..ShootingOptions::default()
            },
        )
    }

    fn middle(&self, x: f64, y: f64) -> Point {
        let s = (y - THIRD) / THIRD;
        match self.kind {
            HorseshoeKind::Folded => {
                let r = 0.5 - x / 3.0;
                let th = std::f64::consts::PI * s;
                [0.5 - r * th.cos(), 1.0 + r * th.sin()]
            }
            HorseshoeKind::OrientationPreserving => {
                // nested rectangular hooks: up, right, down, left, up
                let e = 0.1 + (1.0 - x) / 3.0;
                let pts = [
                    [x / 3.0, 1.0],
                    [x / 3.0, 1.0 + e],
                    [1.0 + e, 1.0 + e],
                    [1.0 + e, -e],
                    [2.0 * THIRD + x / 3.0, -e],
                    [2.0 * THIRD + x / 3.0, 0.0],
                ];
                let lens: Vec<f64> = pts
                    .windows(2)
                    .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
                    .collect();
                let mut rem = s.clamp(0.0, 1.0) * lens.iter().sum::<f64>();
                for (k, &l) in lens.iter().enumerate() {
                    if rem <= l || k == lens.len() - 1 {
                        return lerp(pts[k], pts[k + 1], (rem / l).min(1.0));
                    }
                    rem -= l;
                }
                unreachable!()
            }
        }
    }
}

impl PlanarMap for AffineHorseshoe {
    fn apply(&self, x: Point) -> Option<Point> {
        let (u, v) = (x[0], x[1]);
        Some(if v <= THIRD {
            [u / 3.0, 3.0 * v]
        } else if v >= 2.0 * THIRD {
            match self.kind {
                HorseshoeKind::Folded => [1.0 - u / 3.0, 3.0 - 3.0 * v],
                HorseshoeKind::OrientationPreserving => [2.0 * THIRD + u / 3.0, 3.0 * v - 2.0],
            }
        } else {
            self.middle(u, v)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::planar::AffineMap;

    #[test]
    fn affine_horseshoes_pass() {
        for h in [AffineHorseshoe::folded(), AffineHorseshoe::orientation_preserving()] {
            let r = verify_topological_horseshoe(
                &h,
                &AffineHorseshoe::rectangle(),
                &AffineHorseshoe::strips(),
                500,
            );
            assert!(r.valid && r.condition_i && r.condition_ii, "{h:?}: {r:?}");
            assert_eq!(r.failures, 0);
        }
    }

    #[test]
    fn middle_band_is_continuous() {
        for h in [AffineHorseshoe::folded(), AffineHorseshoe::orientation_preserving()] {
            for x in [0.0, 0.3, 1.0] {
                for y in [THIRD, 2.0 * THIRD] {
                    let lo = h.apply([x, y - 1e-12]).unwrap();
                    let hi = h.apply([x, y + 1e-12]).unwrap();
                    assert!((lo[0] - hi[0]).abs() < 1e-9 && (lo[1] - hi[1]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn contraction_fails() {
        let m = AffineMap {
            m: [[0.5, 0.0], [0.0, 0.5]],
            t: [0.25, 0.25],
        };
        let r = verify_topological_horseshoe(
            &m,
            &AffineHorseshoe::rectangle(),
            &AffineHorseshoe::strips(),
            500,
        );
        assert!(r.valid && !r.condition_i && !r.pass);
        assert!(r.crossings.iter().all(|c| c.worst_point.is_some()));
    }

    #[test]
    fn failures_invalidate() {
        let m = crate::symbolic::planar::FnMap(|x: Point| (x[0] < 0.9).then_some(x));
        let r = verify_topological_horseshoe(
            &m,
            &AffineHorseshoe::rectangle(),
            &AffineHorseshoe::strips(),
            500,
        );
        assert!(!r.valid && !r.pass);
    }

    #[test]
    fn periodic_point_itineraries() {
        let h = AffineHorseshoe::orientation_preserving();
        let w = SymbolWord::parse("1122").unwrap();
        let sol = h.periodic_orbit(&w).unwrap();
        assert!(sol.residual < 1e-12);
        assert_eq!(h.itinerary(sol.points[0], 8).unwrap(), [1, 1, 2, 2, 1, 1, 2, 2]);
    }
}
