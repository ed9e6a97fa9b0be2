//! Per-tet water volume and momentum on the deforming mesh.

mod advect;
mod conserve;
mod forces;
mod io;

pub use advect::{advect, clamp_trace, MeshFrame, TRACE_BISECTIONS};
pub use conserve::{pushout, rank_order, smear, velocity_correction, PushoutStats, MAX_SWEEPS};
pub use forces::{apply_adhesion, apply_external_forces, apply_porosity_drag, PARALLEL_DRAG};
pub use io::{read_water, write_water, WetTet};

use crate::Vec3;

/// Water volume below which a tet counts as dry (m³).
pub const EPS_W: f64 = 1e-12;

/// The VOF unknowns: per-tet water volume (m³) and volume-weighted
/// velocity (m³·m/s).
#[derive(Clone, Debug, PartialEq)]
pub struct WaterState {
    pub water: Vec<f64>,
    pub momentum: Vec<Vec3>,
}

impl WaterState {
    pub fn new(n_tets: usize) -> Self {
        Self {
            water: vec![0.0; n_tets],
            momentum: vec![Vec3::zeros(); n_tets],
        }
    }

    pub fn n_tets(&self) -> usize {
        self.water.len()
    }

    pub fn total_water(&self) -> f64 {
        self.water.iter().fold(0.0, |a, w| a + w)
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.momentum.iter().sum()
    }

    /// Velocity of tet `t`, zero when dry.
    pub fn velocity(&self, t: usize) -> Vec3 {
        if self.water[t] > EPS_W {
            self.momentum[t] / self.water[t]
        } else {
            Vec3::zeros()
        }
    }
}

/// Water leaving the mesh, destined to become a spray particle.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerEntry {
    pub volume: f64,
    pub momentum: Vec3,
    pub position: Vec3,
    /// Outward normal of the exterior face it crossed, for boundary overflow.
    pub normal: Option<Vec3>,
}

/// Volume and momentum crossing the VOF boundary during one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransferLedger {
    pub to_particles: Vec<LedgerEntry>,
    /// Water pulled in from the grid by off-mesh backward samples.
    pub from_grid: f64,
    pub from_grid_momentum: Vec3,
}

impl TransferLedger {
    pub fn to_particles_volume(&self) -> f64 {
        self.to_particles.iter().map(|e| e.volume).sum()
    }

    pub fn to_particles_momentum(&self) -> Vec3 {
        self.to_particles.iter().map(|e| e.momentum).sum()
    }

    pub fn absorb(&mut self, other: TransferLedger) {
        self.to_particles.extend(other.to_particles);
        self.from_grid += other.from_grid;
        self.from_grid_momentum += other.from_grid_momentum;
    }
}

/// Read access to the background grid for off-mesh samples.
pub trait GridSampler: Sync {
    fn velocity(&self, p: &Vec3) -> Vec3;
    /// Water level set, negative inside grid water.
    fn phi_water(&self, p: &Vec3) -> f64;
}

/// A grid with no water anywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoGrid;

impl GridSampler for NoGrid {
    fn velocity(&self, _: &Vec3) -> Vec3 {
        Vec3::zeros()
    }

    fn phi_water(&self, _: &Vec3) -> f64 {
        f64::INFINITY
    }
}
