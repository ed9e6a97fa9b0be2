use std::f64::consts::PI;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{mean_edge_length, tet_positions, PointLocator, TetMesh};
use crate::Vec3;

/// A hair strand as a polyline of rest-pose points with a constant radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HairStrand {
    pub points: Vec<Vec3>,
    pub radius: f64,
}

/// Straight strands growing radially out of a spherical cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FurPatch {
    pub center: Vec3,
    pub sphere_radius: f64,
    /// Cap axis; strands cover directions within `half_angle` degrees of it.
    pub axis: Vec3,
    pub half_angle: f64,
    pub count: usize,
    pub length: f64,
    pub strand_radius: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
}

fn default_segments() -> usize {
    4
}

impl FurPatch {
    /// Strand roots on a golden-angle spiral over the cap.
    pub fn strands(&self) -> Vec<HairStrand> {
        let axis = self.axis.try_normalize(1e-300).unwrap_or_else(Vec3::y);
        let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = axis.cross(&helper).normalize();
        let e2 = axis.cross(&e1);
        let cos_max = self.half_angle.to_radians().cos();
        let golden = PI * (3.0 - 5f64.sqrt());
        let segs = self.segments.max(1);
        (0..self.count)
            .map(|i| {
                let z = 1.0 - (1.0 - cos_max) * (i as f64 + 0.5) / self.count as f64;
                let s = (1.0 - z * z).max(0.0).sqrt();
                let a = golden * i as f64;
                let d = axis * z + e1 * (s * a.cos()) + e2 * (s * a.sin());
                let points = (0..=segs)
                    .map(|k| self.center + d * (self.sphere_radius + self.length * k as f64 / segs as f64))
                    .collect();
                HairStrand {
                    points,
                    radius: self.strand_radius,
                }
            })
            .collect()
    }
}

/// Hair volume and summed direction per tet for strands in the pose `pos`.
///
/// Every segment is cut into pieces no longer than a quarter of the mean tet
/// edge; each piece deposits its cylinder volume `π r² L` at its midpoint.
/// Strands are unoriented, so each piece is flipped to agree with the
/// direction already accumulated in its tet.
pub fn rasterize_hair(mesh: &TetMesh, pos: &[Vec3], strands: &[HairStrand]) -> (Vec<f64>, Vec<Vec3>) {
    let n = mesh.n_tets();
    let mut vol = vec![0.0; n];
    let mut dir = vec![Vec3::zeros(); n];
    if strands.is_empty() || n == 0 {
        return (vol, dir);
    }
    let locator = PointLocator::new(mesh, pos);
    let spacing = mean_edge_length(mesh, pos) / 4.0;
    for s in strands {
        if !(s.radius > 0.0) {
            log::warn!("skipping hair strand with radius {}", s.radius);
            continue;
        }
        let area = PI * s.radius * s.radius;
        for w in s.points.windows(2) {
            let seg = w[1] - w[0];
            let len = seg.norm();
            if len <= 0.0 {
                continue;
            }
            let unit = seg / len;
            let pieces = (len / spacing).ceil().max(1.0) as usize;
            let dv = area * len / pieces as f64;
            for k in 0..pieces {
                let p = w[0] + seg * ((k as f64 + 0.5) / pieces as f64);
                if let Some((t, _)) = locator.locate(&p) {
                    let t = t as usize;
                    let d = if unit.dot(&dir[t]) < 0.0 { -unit } else { unit };
                    vol[t] += dv;
                    dir[t] += d * dv;
                }
            }
        }
    }
    for d in dir.iter_mut() {
        *d = d.try_normalize(1e-300).unwrap_or_else(Vec3::zeros);
    }
    (vol, dir)
}

/// Hair fraction (clamped to `[0, 1]`) and unit direction in the pose `pos`.
pub fn bake_hair(mesh: &TetMesh, pos: &[Vec3], strands: &[HairStrand]) -> (Vec<f64>, Vec<Vec3>) {
    let (vol, dir) = rasterize_hair(mesh, pos, strands);
    let tet_vol = super::tet_volumes(mesh, pos);
    let frac = vol
        .iter()
        .zip(&tet_vol)
        .map(|(&h, &v)| if v > 0.0 { (h / v).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    (frac, dir)
}

/// Carries rest-pose hair into a deformed frame: the volume fraction is
/// kept (clamped so solid plus hair never exceeds the tet) and the direction
/// is pushed forward by each tet's deformation gradient.
pub fn deform_hair(
    mesh: &TetMesh,
    rest: &[Vec3],
    pos: &[Vec3],
    rest_vol: &[f64],
    rest_hair: &(Vec<f64>, Vec<Vec3>),
    solid_frac: &[f64],
) -> (Vec<f64>, Vec<Vec3>) {
    let (vol, dir) = rest_hair;
    (0..mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            if vol[t] <= 0.0 || rest_vol[t] <= 0.0 {
                return (0.0, Vec3::zeros());
            }
            let frac = (vol[t] / rest_vol[t]).min(1.0 - solid_frac[t]).max(0.0);
            let r = tet_positions(mesh.tet(t), rest);
            let x = tet_positions(mesh.tet(t), pos);
            let dr = Matrix3::from_columns(&[r[1] - r[0], r[2] - r[0], r[3] - r[0]]);
            let dx = Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]]);
            let d = match dr.try_inverse() {
                Some(inv) => (dx * inv * dir[t]).try_normalize(1e-300).unwrap_or(dir[t]),
                None => dir[t],
            };
            (frac, d)
        })
        .unzip()
}
