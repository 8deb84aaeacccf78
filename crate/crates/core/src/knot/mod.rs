//! Knot typing of closed polygonal curves.
//!
//! A curve is projected to a crossing diagram, reduced by Reidemeister I/II moves on its
//! Gauss code, and certified by its Alexander polynomial. The certificate is exact (integer
//! arithmetic) but only up to Alexander equivalence: `Δ = 1` is reported as
//! "unknot-compatible", never as a proof of unknottedness.

mod alexander;
mod braid;
mod diagram;
mod poly;

pub use alexander::{alexander, identify, torus_alexander, Certificate, KnotClass, IDENTIFY_BOUND};
pub use braid::{braid_to_knot, lorenz_word_to_braid, torus_braid, BraidWord, LorenzBraid};
pub use diagram::{
    count_faces, inflate_unknot, is_planar, project, CrossingDiagram, CrossingInfo, GaussCode,
    Passage, ProjectOptions,
};
pub use poly::LaurentPoly;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnotError {
    #[error("integer overflow in polynomial arithmetic")]
    Overflow,
    #[error("polynomial division is not exact")]
    InexactDivision,
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("no generic projection found after {attempts} perturbations")]
    Genericity { attempts: usize },
    #[error("invalid Gauss code: {0}")]
    InvalidCode(String),
    #[error("diagram is disconnected")]
    Disconnected,
    #[error("torus parameters ({p}, {q}) must be coprime and at least 2")]
    TorusParams { p: u32, q: u32 },
    #[error("braid generator {letter} is out of range for {strands} strands")]
    BraidLetter { letter: i32, strands: usize },
    #[error(transparent)]
    Word(#[from] crate::symbolic::WordError),
    #[error("braid closure has {0} components; only knots are supported")]
    NotAKnot(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Orbit(String),
    Lambda,
    Braid(String),
    Synthetic(String),
}

/// Closed polygon in 3-space; the closing edge from the last vertex back to the first is
/// implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonalKnot {
    vertices: Vec<[f64; 3]>,
    pub provenance: Provenance,
}

impl PolygonalKnot {
    /// Drops a repeated closing vertex. Consecutive duplicates and non-finite coordinates are
    /// rejected.
    pub fn new(mut vertices: Vec<[f64; 3]>, provenance: Provenance) -> Result<Self, KnotError> {
        if vertices.len() >= 2 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(KnotError::InvalidCurve(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(KnotError::InvalidCurve("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(KnotError::InvalidCurve(format!("repeated vertex at index {i}")));
            }
        }
        Ok(PolygonalKnot {
            vertices,
            provenance,
        })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn segment(&self, i: usize) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.vertices.len();
        (
            Vector3::from(self.vertices[i]),
            Vector3::from(self.vertices[(i + 1) % n]),
        )
    }

    /// Midpoint insertion on every edge.
    pub fn refined(&self) -> PolygonalKnot {
        let n = self.vertices.len();
        let mut v = Vec::with_capacity(2 * n);
        for i in 0..n {
            let (a, b) = self.segment(i);
            v.push(self.vertices[i]);
            let m = (a + b) * 0.5;
            v.push([m.x, m.y, m.z]);
        }
        PolygonalKnot {
            vertices: v,
            provenance: self.provenance.clone(),
        }
    }

    pub fn min_edge_length(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.segment(i);
                (b - a).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance between two edges that share no vertex.
    pub fn min_nonadjacent_distance(&self, exec: Execution) -> f64 {
        let n = self.len();
        let per_edge = exec.map_range(n, |i| {
            let (a, b) = self.segment(i);
            let mut best = f64::INFINITY;
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = self.segment(j);
                best = best.min(segment_distance(&a, &b, &c, &d));
            }
            best
        });
        per_edge.into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_simple(&self, exec: Execution) -> bool {
        self.min_nonadjacent_distance(exec) > 0.0
    }

    pub fn bounding_radius(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| Vector3::from(*v).norm())
            .fold(0.0, f64::max)
    }
}

/// Distance between the segments `[a, b]` and `[c, d]`.
pub fn segment_distance(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
    d: &Vector3<f64>,
) -> f64 {
    let u = b - a;
    let v = d - c;
    let w = a - c;
    let aa = u.dot(&u);
    let bb = u.dot(&v);
    let cc = v.dot(&v);
    let dd = u.dot(&w);
    let ee = v.dot(&w);
    let den = aa * cc - bb * bb;
    let (mut sn, mut sd, mut tn, mut td);
    if den <= 1e-14 * aa * cc {
        sn = 0.0;
        sd = 1.0;
        tn = ee;
        td = cc;
    } else {
        sd = den;
        td = den;
        sn = bb * ee - cc * dd;
        tn = aa * ee - bb * dd;
        if sn < 0.0 {
            sn = 0.0;
            tn = ee;
            td = cc;
        } else if sn > sd {
            sn = sd;
            tn = ee + bb;
            td = cc;
        }
    }
    if tn < 0.0 {
        tn = 0.0;
        if -dd < 0.0 {
            sn = 0.0;
        } else if -dd > aa {
            sn = sd;
        } else {
            sn = -dd;
            sd = aa;
        }
    } else if tn > td {
        tn = td;
        if -dd + bb < 0.0 {
            sn = 0.0;
        } else if -dd + bb > aa {
            sn = sd;
        } else {
            sn = -dd + bb;
            sd = aa;
        }
    }
    let sc = if sn.abs() < 1e-300 { 0.0 } else { sn / sd };
    let tc = if tn.abs() < 1e-300 { 0.0 } else { tn / td };
    (w + u * sc - v * tc).norm()
}
