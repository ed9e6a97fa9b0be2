use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Escalation;
use crate::mesh::{centroid, tet_positions, SolidField, TetMesh};
use crate::Vec3;

/// Solid surface normal, object velocity and solid φ per tet.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceData {
    pub normal: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    pub phi: Vec<f64>,
}

/// Tets grouped by rank, ascending, ids ascending within a rank.
fn rank_levels(rank: &[i32]) -> Vec<Vec<usize>> {
    let max = rank.iter().copied().max().unwrap_or(0).max(0) as usize;
    let mut levels = vec![Vec::new(); max + 2];
    for (t, &r) in rank.iter().enumerate() {
        levels[(r + 1) as usize].push(t);
    }
    levels
}

/// Tets whose escalation list contains each tet.
fn reverse_escalation(n: usize, esc: &Escalation) -> Vec<Vec<u32>> {
    let mut rev = vec![Vec::new(); n];
    for s in 0..n {
        for &t in esc.of(s) {
            rev[t as usize].push(s as u32);
        }
    }
    rev
}

/// Lower-rank donors of `t`: face neighbors and escalation sources, falling
/// back to node neighbors when neither exists.
fn donors(mesh: &TetMesh, rank: &[i32], rev: &[Vec<u32>], t: usize, accept: impl Fn(usize) -> bool) -> Vec<usize> {
    let lower = |o: usize| rank[o] >= 0 && rank[o] < rank[t] && accept(o);
    let mut d: Vec<usize> = mesh
        .face_neighbors(t)
        .map(|o| o as usize)
        .chain(rev[t].iter().map(|&o| o as usize))
        .filter(|&o| lower(o))
        .collect();
    if d.is_empty() {
        d = mesh
            .node_neighbors(t)
            .into_iter()
            .map(|o| o as usize)
            .filter(|&o| lower(o))
            .collect();
    }
    d.sort_unstable();
    d.dedup();
    d
}

/// Solid normal and velocity for every tet. Solid and cut tets evaluate the
/// solid field at their centroid; higher ranks average the values already
/// assigned to their lower-rank donors, rank by rank.
pub fn extrapolate_surface_data(
    mesh: &TetMesh,
    pos: &[Vec3],
    rank: &[i32],
    esc: &Escalation,
    solids: &SolidField,
    t: f64,
) -> SurfaceData {
    let n = mesh.n_tets();
    let cents: Vec<Vec3> = (0..n).map(|i| centroid(&tet_positions(mesh.tet(i), pos))).collect();
    let direct: Vec<(f64, Vec3, Vec3)> = cents
        .par_iter()
        .map(|c| {
            let (phi, nrm) = solids.query(c, t);
            (phi, nrm, solids.velocity(c, t))
        })
        .collect();
    let phi: Vec<f64> = direct.iter().map(|d| d.0).collect();
    let mut normal: Vec<Vec3> = direct.iter().map(|d| d.1).collect();
    let mut velocity: Vec<Vec3> = direct.iter().map(|d| d.2).collect();
    if solids.is_empty() {
        return SurfaceData { normal, velocity, phi };
    }

    let rev = reverse_escalation(n, esc);
    for level in rank_levels(rank).into_iter().skip(2) {
        let updates: Vec<(usize, Vec3, Vec3)> = level
            .par_iter()
            .map(|&i| {
                let d = donors(mesh, rank, &rev, i, |_| true);
                if d.is_empty() {
                    return (i, normal[i], velocity[i]);
                }
                let nsum: Vec3 = d.iter().map(|&o| normal[o]).sum();
                let vsum: Vec3 = d.iter().map(|&o| velocity[o]).sum();
                let len = nsum.norm();
                let nrm = if len > 1e-12 { nsum / len } else { normal[i] };
                (i, nrm, vsum / d.len() as f64)
            })
            .collect();
        for (i, nrm, v) in updates {
            normal[i] = nrm;
            velocity[i] = v;
        }
    }
    SurfaceData { normal, velocity, phi }
}

/// Surface region a paint entry applies to, in the solid's rest frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case", deny_unknown_fields)]
pub enum PaintRegion {
    All,
    Sphere { center: Vec3, radius: f64 },
    Box { min: Vec3, max: Vec3 },
}

impl PaintRegion {
    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            PaintRegion::All => true,
            PaintRegion::Sphere { center, radius } => (p - center).norm() <= *radius,
            PaintRegion::Box { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedDirection {
    Inward,
    Outward,
}

/// Adhesion force direction: toward or away from the surface, or a fixed
/// world vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PaintDirection {
    Named(NamedDirection),
    Vector(Vec3),
}

impl PaintDirection {
    fn resolve(&self, normal: &Vec3) -> Vec3 {
        match self {
            PaintDirection::Named(NamedDirection::Inward) => -normal,
            PaintDirection::Named(NamedDirection::Outward) => *normal,
            PaintDirection::Vector(v) => v.try_normalize(1e-300).unwrap_or_else(Vec3::zeros),
        }
    }
}

impl Default for PaintDirection {
    fn default() -> Self {
        PaintDirection::Named(NamedDirection::Inward)
    }
}

/// One adhesion paint stroke: coefficient α (force per unit water volume)
/// and direction over a surface region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdhesionPaint {
    #[serde(flatten)]
    pub region: PaintRegion,
    pub alpha: f64,
    #[serde(default)]
    pub direction: PaintDirection,
}

/// Per-tet adhesion coefficient and unit direction.
///
/// Cut tets take the average α and direction of every stroke whose region
/// contains their nearest surface point. Higher ranks then average their
/// painted lower-rank donors in ascending rank order; tets without painted
/// donors stay unpainted (α = 0, zero direction).
#[allow(clippy::too_many_arguments)]
pub fn rasterize_adhesion(
    mesh: &TetMesh,
    pos: &[Vec3],
    rank: &[i32],
    esc: &Escalation,
    surf: &SurfaceData,
    solids: &SolidField,
    t: f64,
    paint: &[AdhesionPaint],
) -> (Vec<f64>, Vec<Vec3>) {
    let n = mesh.n_tets();
    let mut alpha = vec![0.0; n];
    let mut dir = vec![Vec3::zeros(); n];
    if paint.is_empty() || solids.is_empty() {
        return (alpha, dir);
    }
    let mut painted = vec![false; n];
    let levels = rank_levels(rank);
    let cut: Vec<(usize, f64, Vec3, bool)> = levels[1]
        .par_iter()
        .map(|&i| {
            let c = centroid(&tet_positions(mesh.tet(i), pos));
            let (phi, nrm) = (surf.phi[i], surf.normal[i]);
            let rest = solids.to_rest(&(c - nrm * phi), t);
            let mut a = 0.0;
            let mut d = Vec3::zeros();
            let mut hits = 0;
            for p in paint.iter().filter(|p| p.region.contains(&rest)) {
                a += p.alpha;
                d += p.direction.resolve(&nrm);
                hits += 1;
            }
            if hits == 0 {
                return (i, 0.0, Vec3::zeros(), false);
            }
            (
                i,
                a / hits as f64,
                d.try_normalize(1e-12).unwrap_or_else(Vec3::zeros),
                true,
            )
        })
        .collect();
    for (i, a, d, p) in cut {
        alpha[i] = a;
        dir[i] = d;
        painted[i] = p;
    }

    let rev = reverse_escalation(n, esc);
    for level in levels.into_iter().skip(2) {
        let updates: Vec<(usize, f64, Vec3)> = level
            .par_iter()
            .filter_map(|&i| {
                let d = donors(mesh, rank, &rev, i, |o| painted[o]);
                if d.is_empty() {
                    return None;
                }
                let a = d.iter().map(|&o| alpha[o]).sum::<f64>() / d.len() as f64;
                let s: Vec3 = d.iter().map(|&o| dir[o]).sum();
                Some((i, a, s.try_normalize(1e-12).unwrap_or_else(Vec3::zeros)))
            })
            .collect();
        for (i, a, d) in updates {
            alpha[i] = a;
            dir[i] = d;
            painted[i] = true;
        }
    }
    (alpha, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bake::{build_escalation, compute_occupancy, compute_ranks};
    use crate::mesh::{generate_bcc_lattice, Aabb, QuadratureRule, RigidMotion, Shape, Solid};

    struct Setup {
        mesh: TetMesh,
        pos: Vec<Vec3>,
        rank: Vec<i32>,
        esc: Escalation,
        solids: SolidField,
    }

    fn setup(motion: RigidMotion) -> Setup {
        let (mesh, pos) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)), 0.1).unwrap();
        let solids = SolidField::new(vec![Solid {
            shape: Shape::Sphere {
                center: Vec3::new(0.5, 0.5, 0.5),
                radius: 0.25,
            },
            motion,
        }]);
        let f = compute_occupancy(&mesh, &pos, &solids, 0.0, &QuadratureRule::new(10).unwrap());
        let rank = compute_ranks(&mesh, &f);
        let (esc, _) = build_escalation(&mesh, &rank, &vec![false; mesh.n_tets()]);
        Setup {
            mesh,
            pos,
            rank,
            esc,
            solids,
        }
    }

    #[test]
    fn static_sphere_normals_are_radial_and_velocities_zero() {
        let s = setup(RigidMotion::default());
        let d = extrapolate_surface_data(&s.mesh, &s.pos, &s.rank, &s.esc, &s.solids, 0.0);
        for t in 0..s.mesh.n_tets() {
            assert!((d.normal[t].norm() - 1.0).abs() < 1e-9);
            assert_eq!(d.velocity[t], Vec3::zeros());
            if s.rank[t] == 0 {
                let c = centroid(&tet_positions(s.mesh.tet(t), &s.pos));
                let radial = (c - Vec3::new(0.5, 0.5, 0.5)).normalize();
                assert!((d.normal[t] - radial).norm() < 1e-3);
            }
        }
    }

    #[test]
    fn spinning_sphere_velocity_reaches_exterior() {
        let s = setup(RigidMotion {
            angular_velocity: Vec3::new(0.0, 0.0, 2.0),
            pivot: Vec3::new(0.5, 0.5, 0.5),
            ..Default::default()
        });
        let d = extrapolate_surface_data(&s.mesh, &s.pos, &s.rank, &s.esc, &s.solids, 0.0);
        let moving = (0..s.mesh.n_tets())
            .filter(|&t| s.rank[t] >= 1 && d.velocity[t].norm() > 0.1)
            .count();
        assert!(moving > 0);
    }

    fn adhesion(s: &Setup, paint: &[AdhesionPaint]) -> (Vec<f64>, Vec<Vec3>) {
        let d = extrapolate_surface_data(&s.mesh, &s.pos, &s.rank, &s.esc, &s.solids, 0.0);
        rasterize_adhesion(&s.mesh, &s.pos, &s.rank, &s.esc, &d, &s.solids, 0.0, paint)
    }

    #[test]
    fn uniform_paint_reaches_every_exterior_tet() {
        let s = setup(RigidMotion::default());
        let paint = [AdhesionPaint {
            region: PaintRegion::All,
            alpha: 2.0,
            direction: PaintDirection::Named(NamedDirection::Outward),
        }];
        let (a, d) = adhesion(&s, &paint);
        for t in 0..s.mesh.n_tets() {
            if s.rank[t] >= 0 {
                assert!((a[t] - 2.0).abs() < 1e-12, "tet {t} rank {}", s.rank[t]);
                assert!((d[t].norm() - 1.0).abs() < 1e-9);
            }
        }
        let (a, _) = adhesion(&s, &[]);
        assert!(a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn patch_paint_stays_within_painted_range() {
        let s = setup(RigidMotion::default());
        let paint = [AdhesionPaint {
            region: PaintRegion::Sphere {
                center: Vec3::new(0.5, 0.75, 0.5),
                radius: 0.1,
            },
            alpha: 3.0,
            direction: PaintDirection::Vector(Vec3::new(0.0, -1.0, 0.0)),
        }];
        let (a, _) = adhesion(&s, &paint);
        assert!(a.iter().all(|&x| (0.0..=3.0).contains(&x)));
        assert!(a.iter().any(|&x| x > 0.0));
        let far = (0..s.mesh.n_tets())
            .filter(|&t| centroid(&tet_positions(s.mesh.tet(t), &s.pos)).y < 0.3)
            .all(|t| a[t] == 0.0);
        assert!(far);
    }
}
