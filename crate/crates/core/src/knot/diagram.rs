use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{KnotError, PolygonalKnot};
use crate::exec::Execution;

/// One pass of the curve through a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Passage {
    pub crossing: usize,
    pub over: bool,
}

/// Signed Gauss code: the cyclic sequence of passages along the knot and a sign per crossing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussCode {
    pub passages: Vec<Passage>,
    pub signs: Vec<i8>,
}

impl GaussCode {
    pub fn unknot() -> Self {
        GaussCode {
            passages: Vec::new(),
            signs: Vec::new(),
        }
    }

    /// Every crossing must occur exactly once over and once under, with sign `±1`.
    pub fn new(passages: Vec<Passage>, signs: Vec<i8>) -> Result<Self, KnotError> {
        let code = GaussCode { passages, signs };
        code.validate()?;
        Ok(code)
    }

    pub fn validate(&self) -> Result<(), KnotError> {
        let n = self.signs.len();
        if self.passages.len() != 2 * n {
            return Err(KnotError::InvalidCode(format!(
                "{} passages for {n} crossings",
                self.passages.len()
            )));
        }
        let mut seen = vec![[false; 2]; n];
        for p in &self.passages {
            let slot = seen
                .get_mut(p.crossing)
                .ok_or_else(|| KnotError::InvalidCode(format!("crossing {} out of range", p.crossing)))?;
            let k = usize::from(p.over);
            if slot[k] {
                return Err(KnotError::InvalidCode(format!(
                    "crossing {} passed {} twice",
                    p.crossing,
                    if p.over { "over" } else { "under" }
                )));
            }
            slot[k] = true;
        }
        if let Some(s) = self.signs.iter().find(|s| s.abs() != 1) {
            return Err(KnotError::InvalidCode(format!("sign {s}")));
        }
        Ok(())
    }

    pub fn crossing_count(&self) -> usize {
        self.signs.len()
    }

    pub fn writhe(&self) -> i64 {
        self.signs.iter().map(|&s| i64::from(s)).sum()
    }

    fn position_of(&self, crossing: usize, over: bool) -> usize {
        self.passages
            .iter()
            .position(|p| p.crossing == crossing && p.over == over)
            .expect("valid code")
    }

    /// Removes the given crossings and renumbers the rest; returns the kept original indices.
    fn without(&self, drop: &[usize]) -> (GaussCode, Vec<usize>) {
        let n = self.crossing_count();
        let mut new_index = vec![usize::MAX; n];
        let mut kept = Vec::new();
        for c in 0..n {
            if !drop.contains(&c) {
                new_index[c] = kept.len();
                kept.push(c);
            }
        }
        let passages = self
            .passages
            .iter()
            .filter(|p| new_index[p.crossing] != usize::MAX)
            .map(|p| Passage {
                crossing: new_index[p.crossing],
                over: p.over,
            })
            .collect();
        let signs = kept.iter().map(|&c| self.signs[c]).collect();
        (GaussCode { passages, signs }, kept)
    }

    fn find_r1(&self) -> Option<usize> {
        let len = self.passages.len();
        (0..len).find_map(|i| {
            let a = self.passages[i];
            let b = self.passages[(i + 1) % len];
            (a.crossing == b.crossing).then_some(a.crossing)
        })
    }

    fn find_r2(&self) -> Option<(usize, usize)> {
        let len = self.passages.len();
        if len < 4 {
            return None;
        }
        for i in 0..len {
            let a = self.passages[i];
            let b = self.passages[(i + 1) % len];
            if a.crossing == b.crossing || a.over != b.over {
                continue;
            }
            if self.signs[a.crossing] == self.signs[b.crossing] {
                continue;
            }
            let pa = self.position_of(a.crossing, !a.over);
            let pb = self.position_of(b.crossing, !b.over);
            if (pa + 1) % len == pb || (pb + 1) % len == pa {
                return Some((a.crossing, b.crossing));
            }
        }
        None
    }

    /// Applies Reidemeister I and II reductions until none applies. Returns the reduced code
    /// and, for each remaining crossing, its index in `self`.
    pub fn simplify(&self) -> (GaussCode, Vec<usize>) {
        let mut code = self.clone();
        let mut origin: Vec<usize> = (0..self.crossing_count()).collect();
        loop {
            let drop = if let Some(c) = code.find_r1() {
                vec![c]
            } else if let Some((a, b)) = code.find_r2() {
                vec![a, b]
            } else {
                break;
            };
            let (next, kept) = code.without(&drop);
            origin = kept.iter().map(|&k| origin[k]).collect();
            code = next;
        }
        (code, origin)
    }
}

const OVER_OUT: usize = 0;
const UNDER_OUT: usize = 1;
const OVER_IN: usize = 2;
const UNDER_IN: usize = 3;

/// Counterclockwise order of the four legs at a crossing, seen by the viewer.
fn rotation(sign: i8) -> [usize; 4] {
    if sign > 0 {
        [OVER_OUT, UNDER_OUT, OVER_IN, UNDER_IN]
    } else {
        [OVER_OUT, UNDER_IN, OVER_IN, UNDER_OUT]
    }
}

/// Faces of the 4-valent plane graph the code describes, traced through its rotation system.
pub fn count_faces(code: &GaussCode) -> usize {
    let n = code.crossing_count();
    if n == 0 {
        return 2;
    }
    let len = code.passages.len();
    let out_leg = |p: &Passage| 4 * p.crossing + if p.over { OVER_OUT } else { UNDER_OUT };
    let in_leg = |p: &Passage| 4 * p.crossing + if p.over { OVER_IN } else { UNDER_IN };
    let mut partner = vec![0usize; 4 * n];
    for k in 0..len {
        let a = out_leg(&code.passages[k]);
        let b = in_leg(&code.passages[(k + 1) % len]);
        partner[a] = b;
        partner[b] = a;
    }
    let next_ccw = |leg: usize| {
        let c = leg / 4;
        let rot = rotation(code.signs[c]);
        let pos = rot.iter().position(|&r| r == leg % 4).expect("leg type");
        4 * c + rot[(pos + 1) % 4]
    };
    let mut seen = vec![false; 4 * n];
    let mut faces = 0;
    for start in 0..4 * n {
        if seen[start] {
            continue;
        }
        faces += 1;
        let mut leg = start;
        while !seen[leg] {
            seen[leg] = true;
            leg = next_ccw(partner[leg]);
        }
    }
    faces
}

/// A code is realized by a diagram on the sphere exactly when its Euler characteristic is 2.
pub fn is_planar(code: &GaussCode) -> bool {
    code.crossing_count() == 0 || count_faces(code) == code.crossing_count() + 2
}

/// Random diagram of the unknot built from the empty code by Reidemeister I and II moves.
///
/// Every intermediate code is planar. The result has `target` crossings.
pub fn inflate_unknot(seed: u64, target: usize) -> GaussCode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut code = GaussCode::unknot();
    while code.crossing_count() < target {
        let room = target - code.crossing_count();
        let use_r2 = room >= 2 && rng.random_bool(0.6);
        for _ in 0..200 {
            let cand = if use_r2 {
                insert_r2(&code, &mut rng)
            } else {
                insert_r1(&code, &mut rng)
            };
            if is_planar(&cand) {
                code = cand;
                break;
            }
        }
    }
    code
}

fn insert_r1(code: &GaussCode, rng: &mut ChaCha8Rng) -> GaussCode {
    let c = code.crossing_count();
    let gap = rng.random_range(0..=code.passages.len());
    let over_first = rng.random_bool(0.5);
    let mut passages = code.passages.clone();
    passages.splice(
        gap..gap,
        [
            Passage {
                crossing: c,
                over: over_first,
            },
            Passage {
                crossing: c,
                over: !over_first,
            },
        ],
    );
    let mut signs = code.signs.clone();
    signs.push(if rng.random_bool(0.5) { 1 } else { -1 });
    GaussCode { passages, signs }
}

fn insert_r2(code: &GaussCode, rng: &mut ChaCha8Rng) -> GaussCode {
    let c1 = code.crossing_count();
    let c2 = c1 + 1;
    let len = code.passages.len();
    let mut ga = rng.random_range(0..=len);
    let mut gb = rng.random_range(0..=len);
    if ga > gb {
        std::mem::swap(&mut ga, &mut gb);
    }
    let first_over = rng.random_bool(0.5);
    let first = [
        Passage {
            crossing: c1,
            over: first_over,
        },
        Passage {
            crossing: c2,
            over: first_over,
        },
    ];
    let second = if rng.random_bool(0.5) {
        [c2, c1]
    } else {
        [c1, c2]
    }
    .map(|crossing| Passage {
        crossing,
        over: !first_over,
    });
    let mut passages = code.passages.clone();
    passages.splice(gb..gb, second);
    passages.splice(ga..ga, first);
    let s: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
    let mut signs = code.signs.clone();
    signs.extend([s, -s]);
    GaussCode { passages, signs }
}

/// Geometry of one crossing of a projected curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingInfo {
    pub over_segment: usize,
    pub over_param: f64,
    pub under_segment: usize,
    pub under_param: f64,
    pub sign: i8,
    /// Position in the projection plane.
    pub position: [f64; 2],
}

/// Crossing diagram of a polygonal knot seen from `+direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingDiagram {
    pub direction: [f64; 3],
    /// Projection-plane basis with `e1 × e2 = direction`.
    pub basis: [[f64; 3]; 2],
    pub crossings: Vec<CrossingInfo>,
    pub code: GaussCode,
    /// Perturbations tried before the direction was generic.
    pub attempts: usize,
}

impl CrossingDiagram {
    pub fn crossing_count(&self) -> usize {
        self.crossings.len()
    }

    pub fn writhe(&self) -> i64 {
        self.code.writhe()
    }

    pub fn simplify(&self) -> CrossingDiagram {
        let (code, kept) = self.code.simplify();
        CrossingDiagram {
            direction: self.direction,
            basis: self.basis,
            crossings: kept.iter().map(|&k| self.crossings[k]).collect(),
            code,
            attempts: self.attempts,
        }
    }

    pub fn project_point(&self, v: &[f64; 3]) -> [f64; 2] {
        let v = Vector3::from(*v);
        [
            v.dot(&Vector3::from(self.basis[0])),
            v.dot(&Vector3::from(self.basis[1])),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectOptions {
    pub hint: [f64; 3],
    pub seed: u64,
    pub max_attempts: usize,
    /// Distance below which projected features count as coincident.
    pub tolerance: f64,
    pub exec: Execution,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions {
            hint: [0.0, 0.0, 1.0],
            seed: 0,
            max_attempts: 100,
            tolerance: 1e-9,
            exec: Execution::default(),
        }
    }
}

fn plane_basis(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let axis = if d.x.abs() <= d.y.abs() && d.x.abs() <= d.z.abs() {
        Vector3::x()
    } else if d.y.abs() <= d.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = (axis - d * axis.dot(d)).normalize();
    let e2 = d.cross(&e1);
    (e1, e2)
}

fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

struct Degenerate;

struct RawCrossing {
    i: usize,
    ti: f64,
    j: usize,
    tj: f64,
    point: Vector2<f64>,
}

fn find_crossings(
    pts: &[Vector2<f64>],
    tol: f64,
    exec: Execution,
) -> Result<Vec<RawCrossing>, Degenerate> {
    let n = pts.len();
    let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = seg(i);
        let r = b - a;
        if r.norm() <= tol {
            return Err(Degenerate);
        }
        let (_, c) = seg((i + 1) % n);
        let s = c - b;
        if cross2(&r, &s).abs() <= 1e-12 * r.norm() * s.norm() && r.dot(&s) < 0.0 {
            return Err(Degenerate);
        }
    }
    let rows = exec.map_range(n, |i| {
        let (a, b) = seg(i);
        let r = b - a;
        let rl = r.norm();
        let (minx, maxx) = (a.x.min(b.x) - tol, a.x.max(b.x) + tol);
        let (miny, maxy) = (a.y.min(b.y) - tol, a.y.max(b.y) + tol);
        let mut out = Vec::new();
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = seg(j);
            if c.x.max(d.x) < minx || c.x.min(d.x) > maxx || c.y.max(d.y) < miny || c.y.min(d.y) > maxy {
                continue;
            }
            let s = d - c;
            let sl = s.norm();
            let den = cross2(&r, &s);
            let qp = c - a;
            if den.abs() <= 1e-12 * rl * sl {
                if cross2(&qp, &r).abs() <= tol * rl {
                    // collinear: overlapping projections are degenerate
                    let t0 = qp.dot(&r) / (rl * rl);
                    let t1 = (d - a).dot(&r) / (rl * rl);
                    if t0.max(t1) >= -tol / rl && t0.min(t1) <= 1.0 + tol / rl {
                        return Err(Degenerate);
                    }
                }
                continue;
            }
            let ti = cross2(&qp, &s) / den;
            let tj = cross2(&qp, &r) / den;
            let (ei, ej) = (tol / rl, tol / sl);
            let inside_i = ti > -ei && ti < 1.0 + ei;
            let inside_j = tj > -ej && tj < 1.0 + ej;
            if !(inside_i && inside_j) {
                continue;
            }
            if ti < ei || ti > 1.0 - ei || tj < ej || tj > 1.0 - ej {
                return Err(Degenerate);
            }
            out.push(RawCrossing {
                i,
                ti,
                j,
                tj,
                point: a + r * ti,
            });
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for row in rows {
        all.extend(row?);
    }
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&x, &y| all[x].point.x.total_cmp(&all[y].point.x));
    for k in 0..order.len() {
        for l in k + 1..order.len() {
            let (p, q) = (all[order[k]].point, all[order[l]].point);
            if q.x - p.x > tol {
                break;
            }
            if (q - p).norm() <= tol {
                return Err(Degenerate);
            }
        }
    }
    Ok(all)
}

/// Projects a simple closed polygon to a crossing diagram.
///
/// The direction starts at the hint and is perturbed pseudorandomly (seeded) until the
/// projection is generic: no edge is parallel to it, no vertex lands within `tolerance` of
/// another edge, no three strands meet, and no crossing has equal depths.
pub fn project(knot: &PolygonalKnot, opts: &ProjectOptions) -> Result<CrossingDiagram, KnotError> {
    let hint = Vector3::from(opts.hint);
    if !(hint.norm() > 0.0) || !hint.iter().all(|v| v.is_finite()) {
        return Err(KnotError::InvalidCurve("projection hint must be a nonzero vector".into()));
    }
    let hint = hint.normalize();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = knot.bounding_radius().max(1.0);
    for attempt in 0..opts.max_attempts {
        let d = if attempt == 0 {
            hint
        } else {
            let r = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            (hint + r * 0.05).normalize()
        };
        let (e1, e2) = plane_basis(&d);
        let verts: Vec<Vector3<f64>> = knot.vertices().iter().map(|v| Vector3::from(*v)).collect();
        let pts: Vec<Vector2<f64>> = verts.iter().map(|v| Vector2::new(v.dot(&e1), v.dot(&e2))).collect();
        let depth: Vec<f64> = verts.iter().map(|v| v.dot(&d)).collect();
        let Ok(raw) = find_crossings(&pts, opts.tolerance, opts.exec) else {
            continue;
        };
        let n = pts.len();
        let mut crossings = Vec::with_capacity(raw.len());
        let mut generic = true;
        for rc in &raw {
            let di = depth[rc.i] + rc.ti * (depth[(rc.i + 1) % n] - depth[rc.i]);
            let dj = depth[rc.j] + rc.tj * (depth[(rc.j + 1) % n] - depth[rc.j]);
            if (di - dj).abs() <= 1e-12 * scale {
                generic = false;
                break;
            }
            let (o, ot, u, ut) = if di > dj {
                (rc.i, rc.ti, rc.j, rc.tj)
            } else {
                (rc.j, rc.tj, rc.i, rc.ti)
            };
            let od = pts[(o + 1) % n] - pts[o];
            let ud = pts[(u + 1) % n] - pts[u];
            let sign = if cross2(&od, &ud) > 0.0 { 1 } else { -1 };
            crossings.push(CrossingInfo {
                over_segment: o,
                over_param: ot,
                under_segment: u,
                under_param: ut,
                sign,
                position: [rc.point.x, rc.point.y],
            });
        }
        if !generic {
            continue;
        }
        let mut events: Vec<(usize, f64, Passage)> = Vec::with_capacity(2 * crossings.len());
        for (k, c) in crossings.iter().enumerate() {
            events.push((c.over_segment, c.over_param, Passage { crossing: k, over: true }));
            events.push((c.under_segment, c.under_param, Passage { crossing: k, over: false }));
        }
        events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let code = GaussCode {
            passages: events.into_iter().map(|e| e.2).collect(),
            signs: crossings.iter().map(|c| c.sign).collect(),
        };
        return Ok(CrossingDiagram {
            direction: [d.x, d.y, d.z],
            basis: [[e1.x, e1.y, e1.z], [e2.x, e2.y, e2.z]],
            crossings,
            code,
            attempts: attempt + 1,
        });
    }
    Err(KnotError::Genericity {
        attempts: opts.max_attempts,
    })
}
