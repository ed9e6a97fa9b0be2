//! Volume-conserving volume-of-fluid liquid on a kinematically deforming
//! tetrahedral mesh, two-way coupled to a background MAC-grid level-set
//! solver with mass-carrying spray particles.
//!
//! The crate is organized bottom-up:
//!
//! * [`mesh`]: BCC lattice generation, refinement, topology, point location,
//!   quadrature samples and analytic solid signed-distance fields.
//! * [`bake`]: per-frame precomputation (skinned motion, occupancy, ranks,
//!   escalation lists, extrapolated surface data, adhesion and hair fields)
//!   and the bake file format.
//! * [`vof`]: the per-tet water/momentum solver: three-pass advection,
//!   smear, pushout, velocity correction and the VOF-side forces.
//! * [`grid`]: the background staggered-grid solver.
//! * [`spray`]: spray particles created from VOF overflow.
//! * [`sim`]: the partitioned coupling loop, diagnostics and surfacing.
//! * [`scene`]: the scene description file.

pub mod bake;
pub mod error;
pub mod grid;
pub mod mesh;
pub mod scene;
pub mod sim;
pub mod spray;
pub mod vof;

pub use error::{Error, Result};

/// World-space vector type used throughout (meters, m/s, ...).
pub type Vec3 = nalgebra::Vector3<f64>;

/// Parallel sum whose result does not depend on scheduling: fixed chunks are
/// summed in parallel, the partials in order.
pub(crate) fn det_sum(values: impl rayon::iter::IndexedParallelIterator<Item = f64>) -> f64 {
    use rayon::iter::ParallelIterator;
    let partials: Vec<f64> = values.chunks(4096).map(|c| c.iter().sum::<f64>()).collect();
    partials.iter().sum()
}
