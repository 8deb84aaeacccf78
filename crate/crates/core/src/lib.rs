//! Numerical topology of the Rössler flow.
//!
//! The crate is organized bottom-up:
//!
//! * [`dynamics`] — the vector field, its fixed points and their spectra, and an adaptive
//!   Dormand–Prince integrator with dense output.
//! * [`section`] — the half-plane cross-section `U_p ⊂ {ẏ = 0}` and its first-return map.
//! * [`manifolds`] — the one-dimensional invariant manifolds of the two saddle-foci, the
//!   heteroclinic mismatch, the candidate search and the heteroclinic knot.
//! * [`symbolic`] — itineraries, horseshoe verification, periodic orbits by multiple
//!   shooting, and the fixed-point index.
//! * [`knot`] — crossing diagrams, Alexander polynomials, braids and the L(0,1) template.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the `parallel` feature disabled
//! everything runs sequentially and produces identical results.

pub mod dynamics;
pub mod exec;
pub mod knot;
pub mod manifolds;
pub mod section;
pub mod symbolic;

pub use dynamics::{Params, State};
pub use exec::Execution;
