//! Per-frame precomputation: skinned node motion, occupancy, ranks,
//! escalation lists, extrapolated surface data, adhesion and hair fields.

mod hair;
pub(crate) mod io;
mod occupancy;
mod skin;
mod surface_data;
mod verify;

pub use hair::{bake_hair, deform_hair, rasterize_hair, FurPatch, HairStrand};
pub use io::{read_bake, write_bake};
pub use occupancy::{
    build_escalation, compute_occupancy, compute_ranks, detect_degenerate, Escalation, ESCALATION_FANOUT,
};
pub use skin::{node_velocities, skin_follow, SkinningConfig};
pub use surface_data::{
    extrapolate_surface_data, rasterize_adhesion, AdhesionPaint, PaintDirection, PaintRegion, SurfaceData,
};
pub use verify::verify_frame;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{
    centroid, generate_bcc_lattice, max_edge_length, subdivide, tet_positions, tet_volume, Aabb, QuadratureRule,
    SolidField, TetMesh,
};
use crate::{Result, Vec3};

/// Resolution of the simulation mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub bounds: Aabb,
    /// Edge scale of the coarse BCC lattice before subdivision.
    pub dx: f64,
    #[serde(default)]
    pub subdivisions: u32,
    /// Quadrature samples per tet for occupancy and advection.
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

fn default_samples() -> usize {
    10
}

/// Everything the bake needs, independent of the scene file layout.
#[derive(Clone, Debug)]
pub struct BakeSpec {
    pub mesh: MeshConfig,
    pub skinning: SkinningConfig,
    pub solids: SolidField,
    pub paint: Vec<AdhesionPaint>,
    pub strands: Vec<HairStrand>,
    /// Time between baked frames (the simulation step).
    pub dt: f64,
}

/// Baked data for one frame. Per-tet arrays are indexed by tet id.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBake {
    pub time: f64,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub rank: Vec<i32>,
    pub solid_frac: Vec<f64>,
    /// Signed tet volume in this frame.
    pub volume: Vec<f64>,
    pub capacity: Vec<f64>,
    pub surf_normal: Vec<Vec3>,
    pub surf_velocity: Vec<Vec3>,
    /// Solid φ at the tet centroid.
    pub surf_phi: Vec<f64>,
    pub escalation: Escalation,
    pub adhesion_alpha: Vec<f64>,
    pub adhesion_dir: Vec<Vec3>,
    pub hair_frac: Vec<f64>,
    pub hair_dir: Vec<Vec3>,
    pub disabled: Vec<bool>,
    /// Enclosed pockets: excess water that cannot leave is retained.
    pub pocket: Vec<bool>,
}

impl FrameBake {
    pub fn n_tets(&self) -> usize {
        self.rank.len()
    }

    pub fn centroid(&self, mesh: &TetMesh, t: usize) -> Vec3 {
        centroid(&tet_positions(mesh.tet(t), &self.positions))
    }

    /// Whether tet `t` can hold and exchange water.
    pub fn is_fluid(&self, t: usize) -> bool {
        self.rank[t] >= 0 && !self.disabled[t]
    }

    /// A static frame for a hand-built mesh with prescribed ranks. Rank-0
    /// tets get `solid_frac` of their volume taken by a solid whose outward
    /// normal is `normal`; there is no hair or adhesion.
    pub fn from_ranks(mesh: &TetMesh, positions: Vec<Vec3>, rank: Vec<i32>, solid_frac: f64, normal: Vec3) -> Self {
        let n = mesh.n_tets();
        let volume = tet_volumes(mesh, &positions);
        let disabled = detect_degenerate(&volume);
        let sf: Vec<f64> = rank
            .iter()
            .map(|&r| match r {
                0 => solid_frac,
                r if r < 0 => 1.0,
                _ => 0.0,
            })
            .collect();
        let capacity = (0..n)
            .map(|t| {
                if disabled[t] {
                    0.0
                } else {
                    (volume[t] * (1.0 - sf[t])).max(0.0)
                }
            })
            .collect();
        let (escalation, pocket) = build_escalation(mesh, &rank, &disabled);
        let normal = normal.normalize();
        Self {
            time: 0.0,
            velocities: vec![Vec3::zeros(); positions.len()],
            positions,
            solid_frac: sf,
            volume,
            capacity,
            surf_normal: vec![normal; n],
            surf_velocity: vec![Vec3::zeros(); n],
            surf_phi: rank.iter().map(|&r| r as f64).collect(),
            escalation,
            adhesion_alpha: vec![0.0; n],
            adhesion_dir: vec![-normal; n],
            hair_frac: vec![0.0; n],
            hair_dir: vec![Vec3::x(); n],
            disabled,
            pocket,
            rank,
        }
    }
}

/// A baked frame sequence over one fixed topology.
#[derive(Clone, Debug, PartialEq)]
pub struct Bake {
    pub mesh: TetMesh,
    pub rest: Vec<Vec3>,
    pub frames: Vec<FrameBake>,
    pub dt: f64,
    pub first_frame: usize,
}

impl Bake {
    /// Frame `f` of the animation; requests past either end are clamped, so a
    /// single-frame bake serves a static scene for any step count.
    pub fn frame(&self, f: usize) -> &FrameBake {
        let i = f.saturating_sub(self.first_frame).min(self.frames.len() - 1);
        &self.frames[i]
    }

    pub fn is_static(&self) -> bool {
        self.frames.len() == 1
    }

    pub fn last_frame(&self) -> usize {
        self.first_frame + self.frames.len() - 1
    }

    pub fn max_edge(&self) -> f64 {
        max_edge_length(&self.mesh, &self.rest)
    }
}

/// Builds the rest mesh: coarse lattice plus the requested refinements.
/// Returns the coarse mesh/positions too, since skinning runs on it.
pub fn build_mesh(cfg: &MeshConfig) -> Result<MeshHierarchy> {
    let (coarse, coarse_pos) = generate_bcc_lattice(&cfg.bounds, cfg.dx)?;
    let mut refinements = Vec::new();
    let (mut mesh, mut pos) = (coarse.clone(), coarse_pos.clone());
    for _ in 0..cfg.subdivisions {
        let (m, p, r) = subdivide(&mesh, &pos);
        mesh = m;
        pos = p;
        refinements.push(r);
    }
    Ok(MeshHierarchy {
        coarse,
        coarse_pos,
        refinements,
        mesh,
        rest: pos,
    })
}

#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    pub coarse: TetMesh,
    pub coarse_pos: Vec<Vec3>,
    pub refinements: Vec<crate::mesh::Refinement>,
    pub mesh: TetMesh,
    pub rest: Vec<Vec3>,
}

impl MeshHierarchy {
    pub fn refine(&self, coarse: &[Vec3]) -> Vec<Vec3> {
        let mut p = coarse.to_vec();
        for r in &self.refinements {
            p = r.refine_positions(&p);
        }
        p
    }
}

/// Bakes frames `first..=last`. A scene whose solids never move bakes a
/// single frame regardless of the range.
pub fn bake(spec: &BakeSpec, first: usize, last: usize) -> Result<Bake> {
    let rule = QuadratureRule::new(spec.mesh.n_samples)?;
    let h = build_mesh(&spec.mesh)?;
    let (first, last) = if spec.solids.is_static() {
        (0, 0)
    } else {
        (first, last.max(first))
    };
    info!(
        "baking {} tets, {} nodes, frames {first}..={last}",
        h.mesh.n_tets(),
        h.mesh.n_nodes()
    );

    // One extra leading frame so the backward difference at `first` is real.
    let lead = first.saturating_sub(1);
    let times: Vec<f64> = (lead..=last).map(|f| f as f64 * spec.dt).collect();
    let coarse_frames = skin_follow(&h.coarse, &h.coarse_pos, &spec.solids, &spec.skinning, &times)?;
    let fine: Vec<Vec<Vec3>> = coarse_frames.par_iter().map(|c| h.refine(c)).collect();
    let vel_dt = if times.len() > 1 { spec.dt } else { 1.0 };
    let mut vels = node_velocities(&fine, vel_dt);
    let mut fine = fine;
    if lead < first {
        fine.remove(0);
        vels.remove(0);
    }

    let rest_hair = rasterize_hair(&h.mesh, &h.rest, &spec.strands);
    let rest_vol: Vec<f64> = tet_volumes(&h.mesh, &h.rest);

    let frames: Vec<FrameBake> = fine
        .into_par_iter()
        .zip(vels)
        .enumerate()
        .map(|(i, (pos, vel))| {
            let t = (first + i) as f64 * spec.dt;
            bake_frame(&h.mesh, &h.rest, &rest_vol, pos, vel, t, spec, &rule, &rest_hair)
        })
        .collect();

    Ok(Bake {
        mesh: h.mesh,
        rest: h.rest,
        frames,
        dt: spec.dt,
        first_frame: first,
    })
}

pub(crate) fn tet_volumes(mesh: &TetMesh, pos: &[Vec3]) -> Vec<f64> {
    mesh.tets()
        .par_iter()
        .map(|t| {
            let v = tet_positions(t, pos);
            tet_volume(&v[0], &v[1], &v[2], &v[3])
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn bake_frame(
    mesh: &TetMesh,
    rest: &[Vec3],
    rest_vol: &[f64],
    positions: Vec<Vec3>,
    velocities: Vec<Vec3>,
    time: f64,
    spec: &BakeSpec,
    rule: &QuadratureRule,
    rest_hair: &(Vec<f64>, Vec<Vec3>),
) -> FrameBake {
    let solid_frac = compute_occupancy(mesh, &positions, &spec.solids, time, rule);
    let rank = compute_ranks(mesh, &solid_frac);
    let volume = tet_volumes(mesh, &positions);
    let disabled = detect_degenerate(&volume);
    let (hair_frac, hair_dir) = deform_hair(mesh, rest, &positions, rest_vol, rest_hair, &solid_frac);
    let capacity: Vec<f64> = (0..mesh.n_tets())
        .map(|t| {
            if disabled[t] {
                0.0
            } else {
                (volume[t] * (1.0 - solid_frac[t] - hair_frac[t])).max(0.0)
            }
        })
        .collect();
    let (escalation, pocket) = build_escalation(mesh, &rank, &disabled);
    let surf = extrapolate_surface_data(mesh, &positions, &rank, &escalation, &spec.solids, time);
    let (adhesion_alpha, adhesion_dir) = rasterize_adhesion(
        mesh,
        &positions,
        &rank,
        &escalation,
        &surf,
        &spec.solids,
        time,
        &spec.paint,
    );
    FrameBake {
        time,
        positions,
        velocities,
        rank,
        solid_frac,
        volume,
        capacity,
        surf_normal: surf.normal,
        surf_velocity: surf.velocity,
        surf_phi: surf.phi,
        escalation,
        adhesion_alpha,
        adhesion_dir,
        hair_frac,
        hair_dir,
        disabled,
        pocket,
    }
}
