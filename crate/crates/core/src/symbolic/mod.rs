//! Symbolic dynamics of the first-return map.

mod horseshoe;
mod index;
mod partition;
mod orbit;
mod persistence;
mod planar;
mod shooting;
mod word;

pub use horseshoe::{
    verify_topological_horseshoe, AffineHorseshoe, EdgeSide, HorseshoeKind, HorseshoeReport, Quad,
    StripCrossing, StripMeeting, MAX_FAILURE_FRACTION, MIN_EDGE_SAMPLES,
};
pub use index::{fixed_point_index, IndexError, IndexOptions, IndexResult};
pub use partition::{
    calibrate_from_pairs, calibrate_partition, itinerary, Extremum, ItineraryError,
    PartitionError, PartitionModel, MIN_PARTITION_SAMPLES,
};
pub use planar::{circle_loop, ellipse_loop, AffineMap, FnMap, PlanarMap, Point};
pub use shooting::{
    eigenvalues2, eigenvalues_from, solve_periodic, ShootingError, ShootingOptions, ShootingSolution};
pub use word::{lyndon_words, necklace_count, twisted_cmp, SymbolWord, WordError};
pub use orbit::{
    attractor_returns, close_return_seeds, find_periodic_orbit, finish_orbit, horseshoe_rectangle,
    orbit_integrator,
    OrbitError, OrbitOptions, OrbitStatus, PeriodicOrbit, ReturnMap,
};
pub use persistence::{
    persistence_check, ContinuationFailure, PersistenceOptions, PersistenceReport,
    PersistenceStep, DELTA_FLOOR,
};

#[cfg(test)]
mod tests;
