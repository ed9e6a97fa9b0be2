use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{mean_edge_length, RigidMotion, SolidField, TetMesh};
use crate::{Error, Result, Vec3};

/// Damped mass-spring relaxation parameters for nodes outside the solids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkinningConfig {
    /// Edge spring stiffness (unit node mass).
    pub stiffness: f64,
    pub damping: f64,
    /// Zero-length attachment stiffness for nodes near the solid surface.
    pub attachment_stiffness: f64,
    pub iterations: usize,
    /// Pseudo-time step of the relaxation.
    pub dt_sub: f64,
}

impl Default for SkinningConfig {
    fn default() -> Self {
        Self {
            stiffness: 1.0,
            damping: 2.0,
            attachment_stiffness: 4.0,
            iterations: 60,
            dt_sub: 0.1,
        }
    }
}

struct NodeBinding {
    owner: Option<usize>,
    interior: bool,
    attached: bool,
    /// Per-solid blend weights for the initial guess.
    weights: Vec<f64>,
}

/// Places the mesh nodes for each time in `times`.
///
/// Nodes inside a solid at rest ride rigidly with it. Every other node starts
/// from a distance-weighted blend of the solids' motions and is then relaxed
/// with edge springs (rest lengths from `rest`) plus zero-length attachments
/// for nodes within one mean edge of a surface.
pub fn skin_follow(
    mesh: &TetMesh,
    rest: &[Vec3],
    solids: &SolidField,
    cfg: &SkinningConfig,
    times: &[f64],
) -> Result<Vec<Vec<Vec3>>> {
    if solids.is_static() {
        return Ok(times.iter().map(|_| rest.to_vec()).collect());
    }
    let h = mean_edge_length(mesh, rest).max(1e-12);
    // The sampled field never moves; it takes the last motion slot.
    let still = RigidMotion::default();
    let mut motions: Vec<&RigidMotion> = solids.solids.iter().map(|s| &s.motion).collect();
    if solids.sampled.is_some() {
        motions.push(&still);
    }
    let bindings: Vec<NodeBinding> = rest
        .iter()
        .map(|x| {
            let mut phis: Vec<f64> = solids.solids.iter().map(|s| s.eval(x, 0.0).0).collect();
            if let Some(s) = &solids.sampled {
                phis.push(s.eval(x).0);
            }
            let mut owner = None;
            let mut best = f64::INFINITY;
            for (i, &p) in phis.iter().enumerate() {
                if p < best {
                    best = p;
                    owner = Some(i);
                }
            }
            let weights = phis.iter().map(|&p| 1.0 / (p.max(0.0) + h).powi(2)).collect();
            NodeBinding {
                owner,
                interior: best < 0.0,
                attached: best < h,
                weights,
            }
        })
        .collect();
    let edges: Vec<(u32, u32, f64)> = mesh
        .edges()
        .into_iter()
        .map(|(a, b)| (a, b, (rest[a as usize] - rest[b as usize]).norm()))
        .collect();

    times
        .par_iter()
        .enumerate()
        .map(|(f, &t)| {
            let targets: Vec<Vec3> = rest
                .iter()
                .zip(&bindings)
                .map(|(x, b)| match b.owner {
                    Some(o) if b.interior => motions[o].apply(x, t),
                    _ => {
                        let mut acc = Vec3::zeros();
                        let mut wsum = 0.0;
                        for (m, &w) in motions.iter().zip(&b.weights) {
                            acc += m.apply(x, t) * w;
                            wsum += w;
                        }
                        if wsum > 0.0 {
                            acc / wsum
                        } else {
                            *x
                        }
                    }
                })
                .collect();
            let anchors: Vec<Option<Vec3>> = rest
                .iter()
                .zip(&bindings)
                .map(|(x, b)| match b.owner {
                    Some(o) if b.attached && !b.interior => Some(motions[o].apply(x, t)),
                    _ => None,
                })
                .collect();
            let pos = relax(&edges, &bindings, targets, &anchors, cfg);
            if pos.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
                return Err(Error::NonFinitePositions { frame: f });
            }
            Ok(pos)
        })
        .collect()
}

fn relax(
    edges: &[(u32, u32, f64)],
    bindings: &[NodeBinding],
    mut x: Vec<Vec3>,
    anchors: &[Option<Vec3>],
    cfg: &SkinningConfig,
) -> Vec<Vec3> {
    let n = x.len();
    let mut v = vec![Vec3::zeros(); n];
    let mut force = vec![Vec3::zeros(); n];
    let decay = (1.0 - cfg.damping * cfg.dt_sub).clamp(0.0, 1.0);
    for _ in 0..cfg.iterations {
        force.iter_mut().for_each(|f| *f = Vec3::zeros());
        for &(a, b, l0) in edges {
            let d = x[b as usize] - x[a as usize];
            let len = d.norm();
            if len <= 0.0 {
                continue;
            }
            let f = d * (cfg.stiffness * (len - l0) / len);
            force[a as usize] += f;
            force[b as usize] -= f;
        }
        for i in 0..n {
            if bindings[i].interior {
                continue;
            }
            if let Some(target) = anchors[i] {
                force[i] += (target - x[i]) * cfg.attachment_stiffness;
            }
            v[i] = (v[i] + force[i] * cfg.dt_sub) * decay;
            x[i] += v[i] * cfg.dt_sub;
        }
    }
    x
}

/// Per-node velocities by backward difference; the first frame uses the
/// forward difference and a single frame is at rest.
pub fn node_velocities(frames: &[Vec<Vec3>], dt: f64) -> Vec<Vec<Vec3>> {
    let n = frames.len();
    (0..n)
        .map(|f| {
            if n < 2 {
                return vec![Vec3::zeros(); frames[f].len()];
            }
            let (a, b) = if f == 0 { (0, 1) } else { (f - 1, f) };
            frames[a].iter().zip(&frames[b]).map(|(p, q)| (q - p) / dt).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_bcc_lattice, tet_positions, tet_volume, Aabb, Shape, Solid};

    fn lattice() -> (TetMesh, Vec<Vec3>) {
        generate_bcc_lattice(&Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)), 0.25).unwrap()
    }

    fn sphere(motion: RigidMotion) -> SolidField {
        SolidField::new(vec![Solid {
            shape: Shape::Sphere {
                center: Vec3::zeros(),
                radius: 0.4,
            },
            motion,
        }])
    }

    #[test]
    fn translating_driver_moves_every_node_rigidly() {
        let (mesh, rest) = lattice();
        let v = Vec3::new(0.3, -0.1, 0.2);
        let solids = sphere(RigidMotion {
            velocity: v,
            ..Default::default()
        });
        let times = [0.0, 0.5, 1.0];
        let frames = skin_follow(&mesh, &rest, &solids, &SkinningConfig::default(), &times).unwrap();
        for (f, t) in frames.iter().zip(times) {
            for (p, x) in f.iter().zip(&rest) {
                assert!((p - x - v * t).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn static_driver_keeps_rest_pose() {
        let (mesh, rest) = lattice();
        let frames = skin_follow(
            &mesh,
            &rest,
            &sphere(RigidMotion::default()),
            &SkinningConfig::default(),
            &[0.0, 1.0],
        )
        .unwrap();
        assert_eq!(frames[1], rest);
    }

    fn assert_positive(mesh: &TetMesh, frames: &[Vec<Vec3>]) {
        for f in frames {
            for t in mesh.tets() {
                let v = tet_positions(t, f);
                assert!(tet_volume(&v[0], &v[1], &v[2], &v[3]) > 0.0);
            }
        }
    }

    #[test]
    fn rotating_sphere_keeps_tets_positive() {
        let (mesh, rest) = lattice();
        let solids = sphere(RigidMotion {
            angular_velocity: Vec3::new(0.0, 1.5, 0.5),
            ..Default::default()
        });
        let times: Vec<f64> = (0..10).map(|f| f as f64 * 0.1).collect();
        assert_positive(
            &mesh,
            &skin_follow(&mesh, &rest, &solids, &SkinningConfig::default(), &times).unwrap(),
        );
    }

    #[test]
    fn spinning_sphere_above_static_floor_keeps_tets_positive() {
        let (mesh, rest) = lattice();
        let mut solids = sphere(RigidMotion {
            angular_velocity: Vec3::new(0.0, 0.0, 0.3),
            ..Default::default()
        });
        solids.solids.push(Solid::fixed(Shape::HalfSpace {
            point: Vec3::new(0.0, -0.9, 0.0),
            normal: Vec3::y(),
        }));
        let times: Vec<f64> = (0..10).map(|f| f as f64 * 0.1).collect();
        let frames = skin_follow(&mesh, &rest, &solids, &SkinningConfig::default(), &times).unwrap();
        assert_positive(&mesh, &frames);
        // nodes inside the floor never move
        for (p, x) in frames[9].iter().zip(&rest) {
            if x.y < -0.95 {
                assert!((p - x).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn velocities_of_uniform_translation() {
        let v = Vec3::new(1.0, 2.0, -0.5);
        let frames: Vec<Vec<Vec3>> = (0..4).map(|f| vec![v * (f as f64 * 0.1); 3]).collect();
        for fv in node_velocities(&frames, 0.1) {
            for u in fv {
                assert!((u - v).norm() < 1e-12);
            }
        }
        assert!(node_velocities(&frames[..1], 0.1)[0]
            .iter()
            .all(|u| *u == Vec3::zeros()));
    }

    #[test]
    fn sinusoidal_velocity_is_first_order_accurate() {
        let omega = 3.0;
        let x = |t: f64| Vec3::new((omega * t).sin(), 0.0, 0.0);
        for dt in [0.01, 0.005] {
            let frames: Vec<Vec<Vec3>> = (0..20).map(|f| vec![x(f as f64 * dt)]).collect();
            let vel = node_velocities(&frames, dt);
            for f in 1..20 {
                let exact = omega * (omega * f as f64 * dt).cos();
                assert!((vel[f][0].x - exact).abs() <= omega * omega * dt);
            }
        }
    }
}
