use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::planar::{PlanarMap, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("loop needs at least 3 vertices")]
    DegenerateLoop,
    #[error("map^k is undefined at ({0}, {1})")]
    Evaluation(f64, f64),
    #[error("displacement {displacement:e} at ({x}, {y}) is below the noise floor {floor:e}")]
    ZeroDisplacement {
        x: f64,
        y: f64,
        displacement: f64,
        floor: f64,
    },
    #[error("refinement limit reached with {evaluations} evaluations")]
    RefinementLimit { evaluations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub k: usize,
    pub index: i64,
    pub min_displacement: f64,
    /// Vertices of the loop after adaptive refinement.
    pub refined_vertices: usize,
    pub loop_vertices: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions {
    /// Displacements at or below this are treated as zero.
    pub noise_floor: f64,
    pub max_evaluations: usize,
    pub max_depth: usize,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            noise_floor: 1e-13,
            max_evaluations: 200_000,
            max_depth: 40,
        }
    }
}

fn angle_between(a: Point, b: Point) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot)
}

/// Winding number of `v(x) = f^k(x) − x` along a closed polygon.
///
/// Edges are bisected until consecutive displacement vectors turn by less than `π/2`.
pub fn fixed_point_index<M: PlanarMap + ?Sized>(
    map: &M,
    loop_pts: &[Point],
    k: usize,
    opts: &IndexOptions,
) -> Result<IndexResult, IndexError> {
    if loop_pts.len() < 3 {
        return Err(IndexError::DegenerateLoop);
    }
    let mut evaluations = 0usize;
    let mut min_disp = f64::INFINITY;
    let mut disp = |x: Point, evaluations: &mut usize| -> Result<Point, IndexError> {
        *evaluations += 1;
        let y = map.iterate(x, k).ok_or(IndexError::Evaluation(x[0], x[1]))?;
        let v = [y[0] - x[0], y[1] - x[1]];
        let n = v[0].hypot(v[1]);
        if !(n > opts.noise_floor) {
            return Err(IndexError::ZeroDisplacement {
                x: x[0],
                y: x[1],
                displacement: n,
                floor: opts.noise_floor,
            });
        }
        min_disp = min_disp.min(n);
        Ok(v)
    };
    let n = loop_pts.len();
    let vs = loop_pts
        .iter()
        .map(|&x| disp(x, &mut evaluations))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = 0.0;
    let mut refined = 0usize;
    for i in 0..n {
        let (a, b) = (loop_pts[i], loop_pts[(i + 1) % n]);
        let (va, vb) = (vs[i], vs[(i + 1) % n]);
        // explicit stack of (start, end, v_start, v_end, depth)
        let mut stack = vec![(a, b, va, vb, 0usize)];
        while let Some((p, q, vp, vq, depth)) = stack.pop() {
            let d = angle_between(vp, vq);
            if d.abs() < FRAC_PI_2 {
                total += d;
                refined += 1;
                continue;
            }
            if depth >= opts.max_depth || evaluations >= opts.max_evaluations {
                return Err(IndexError::RefinementLimit { evaluations });
            }
            let m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let vm = disp(m, &mut evaluations)?;
            // second half first so the first half is summed first
            stack.push((m, q, vm, vq, depth + 1));
            stack.push((p, m, vp, vm, depth + 1));
        }
    }
    Ok(IndexResult {
        k,
        index: (total / TAU).round() as i64,
        min_displacement: min_disp,
        refined_vertices: refined,
        loop_vertices: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::planar::{circle_loop, AffineMap, FnMap};
    use proptest::prelude::*;

    fn idx<M: PlanarMap>(m: &M, lp: &[Point]) -> i64 {
        fixed_point_index(m, lp, 1, &IndexOptions::default()).unwrap().index
    }

    #[test]
    fn linear_oracles() {
        let circle = circle_loop([0.0, 0.0], 1.0, 8);
        assert_eq!(idx(&AffineMap::linear([[2.0, 0.0], [0.0, 0.5]]), &circle), -1);
        assert_eq!(idx(&AffineMap::linear([[0.5, 0.0], [0.0, 0.5]]), &circle), 1);
        let shift = AffineMap {
            m: [[1.0, 0.0], [0.0, 1.0]],
            t: [3.0, 0.0],
        };
        assert_eq!(idx(&shift, &circle), 0);
        // a rotation by more than π/2 forces refinement yet keeps index +1
        let rot = AffineMap::linear([[-0.3, -0.9], [0.9, -0.3]]);
        assert_eq!(idx(&rot, &circle_loop([0.0, 0.0], 1.0, 3)), 1);
    }

    #[test]
    fn refinement_and_radius_invariance() {
        let saddle = AffineMap::linear([[2.0, 0.0], [0.0, 0.5]]);
        for n in [4, 8, 16] {
            for r in [0.5, 1.0, 2.0] {
                assert_eq!(idx(&saddle, &circle_loop([0.1, -0.2], r, n)), -1);
            }
        }
    }

    #[test]
    fn errors() {
        let id = FnMap(|x: Point| Some(x));
        let circle = circle_loop([0.0, 0.0], 1.0, 8);
        assert!(matches!(
            fixed_point_index(&id, &circle, 1, &IndexOptions::default()),
            Err(IndexError::ZeroDisplacement { .. })
        ));
        let partial = FnMap(|x: Point| (x[0] < 0.5).then_some([2.0 * x[0], x[1]]));
        assert!(matches!(
            fixed_point_index(&partial, &circle, 1, &IndexOptions::default()),
            Err(IndexError::Evaluation(..))
        ));
        assert_eq!(
            fixed_point_index(&id, &circle[..2], 1, &IndexOptions::default()),
            Err(IndexError::DegenerateLoop)
        );
    }

    proptest! {
        #[test]
        fn index_is_sign_of_det_i_minus_a(a in -3.0f64..3.0, b in -3.0f64..3.0,
                                           c in -3.0f64..3.0, d in -3.0f64..3.0) {
            let det = (1.0 - a) * (1.0 - d) - b * c;
            prop_assume!(det.abs() > 1e-2);
            let m = AffineMap::linear([[a, b], [c, d]]);
            let got = idx(&m, &circle_loop([0.0, 0.0], 1.0, 12));
            prop_assert_eq!(got, if det > 0.0 { 1 } else { -1 });
        }
    }
}
