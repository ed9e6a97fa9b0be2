//! Tetrahedral mesh substrate: lattice generation, refinement, topology,
//! geometric queries and solid signed-distance fields.

mod bcc;
mod geometry;
mod locate;
mod quadrature;
mod sdf;
mod topology;

pub use bcc::{generate_bcc_lattice, subdivide, Refinement};
pub use geometry::{centroid, max_edge_length, mean_edge_length, tet_positions, tet_volume, BarycentricMap};
pub use locate::{locate_point, PointLocator, BARY_EPS};
pub use quadrature::{quadrature_samples, QuadratureRule, SUPPORTED_SAMPLE_COUNTS};
pub use sdf::{RigidMotion, SampledSdf, Shape, Solid, SolidField, EMPTY_PHI};
pub use topology::{TetMesh, NO_TET};

use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb::new(first, first);
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }
}
