//! Momentum exchange between the tet water and the background grid.

use rayon::prelude::*;

use crate::bake::FrameBake;
use crate::grid::MacGrid;
use crate::mesh::{Aabb, PointLocator, TetMesh};
use crate::vof::{WaterState, EPS_W};
use crate::Vec3;

/// Blends grid faces whose centers lie inside wet tets toward the tet
/// velocity: `u ← (1−β)·u + β·u_tet`. Returns the number of faces touched.
pub fn transfer_vof_to_grid(
    state: &WaterState,
    frame: &FrameBake,
    locator: &PointLocator,
    grid: &mut MacGrid,
    beta: f64,
) -> usize {
    if beta == 0.0 {
        return 0;
    }
    let Some(bounds) = Aabb::from_points(frame.positions.iter()) else {
        return 0;
    };
    let (origin, dx) = (grid.origin, grid.dx);
    let mut touched = 0;
    for axis in 0..3 {
        let solid = std::mem::take(&mut grid.solid_face[axis]);
        let f = grid.face(axis).clone();
        let lo = [0, 1, 2].map(|a| (((bounds.min[a] - origin[a]) / dx - f.offset[a]).floor().max(0.0)) as usize);
        let hi = [0, 1, 2].map(|a| {
            let h = ((bounds.max[a] - origin[a]) / dx - f.offset[a]).ceil().max(0.0) as usize;
            h.min(f.dims[a] - 1)
        });
        let data = &mut grid.face_mut(axis).data;
        let mut hits: Vec<(usize, f64)> = Vec::new();
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let n = f.idx(i, j, k);
                    if solid[n] {
                        continue;
                    }
                    let p = f.position(&origin, dx, [i, j, k]);
                    if let Some((t, _)) = locator.locate(&p) {
                        let t = t as usize;
                        if frame.is_fluid(t) && state.water[t] > EPS_W {
                            hits.push((n, state.velocity(t)[axis]));
                        }
                    }
                }
            }
        }
        for (n, ut) in hits {
            data[n] = (1.0 - beta) * data[n] + beta * ut;
            touched += 1;
        }
        grid.solid_face[axis] = solid;
    }
    touched
}

/// What an overwrite did to the tet water.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overwrite {
    pub tets: usize,
    /// Net water volume change (new − old) over overwritten tets.
    pub volume: f64,
    pub momentum: Vec3,
}

/// Tets of rank ≥ 1 with all four nodes inside grid water are saturated and
/// take the grid velocity at their centroid. Cut cells and disabled tets are
/// never touched.
pub fn transfer_grid_to_vof(state: &mut WaterState, mesh: &TetMesh, frame: &FrameBake, grid: &MacGrid) -> Overwrite {
    let node_wet: Vec<bool> = frame
        .positions
        .par_iter()
        .map(|p| grid.sample_phi_water(p) < 0.0)
        .collect();
    let updates: Vec<Option<(f64, Vec3)>> = (0..mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            if frame.rank[t] < 1 || frame.disabled[t] || !mesh.tet(t).iter().all(|&n| node_wet[n as usize]) {
                return None;
            }
            let c = frame.centroid(mesh, t);
            let cap = frame.capacity[t];
            Some((cap, grid.sample_velocity(&c) * cap))
        })
        .collect();
    let mut o = Overwrite::default();
    for (t, u) in updates.into_iter().enumerate() {
        if let Some((w, m)) = u {
            assert!(frame.rank[t] >= 1 && !frame.disabled[t]);
            o.tets += 1;
            o.volume += w - state.water[t];
            o.momentum += m - state.momentum[t];
            state.water[t] = w;
            state.momentum[t] = m;
        }
    }
    o
}
