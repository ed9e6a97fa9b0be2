use std::collections::HashMap;

use super::{tet_volume, Aabb, TetMesh};
use crate::{Error, Result, Vec3};

/// Builds a body-centered-cubic tetrahedral lattice covering `bounds`.
///
/// Cube corners and cube centers are the lattice nodes. Every pair of
/// face-adjacent cube centers together with one edge of the shared square
/// face forms a tet, which gives 12 congruent tets of volume `dx³/12` per
/// cube. A ring of ghost centers just outside the box supplies the tets that
/// close the boundary faces, so the mesh covers the whole box and pokes out
/// by half a cell in pyramids over each boundary face.
pub fn generate_bcc_lattice(bounds: &Aabb, dx: f64) -> Result<(TetMesh, Vec<Vec3>)> {
    let ext = bounds.extent();
    if !(dx > 0.0) || !dx.is_finite() || (0..3).any(|a| !(ext[a] >= dx)) {
        return Err(Error::BoundsTooSmall {
            extent: [ext.x, ext.y, ext.z],
            dx,
        });
    }
    let n = [0, 1, 2].map(|a| ((ext[a] / dx) - 1e-9).ceil().max(1.0) as i64);

    // Raw node numbering: corners first, then centers including the ghost ring.
    let corner_id = |i: i64, j: i64, k: i64| -> u64 { (i + (n[0] + 1) * (j + (n[1] + 1) * k)) as u64 };
    let n_corners = ((n[0] + 1) * (n[1] + 1) * (n[2] + 1)) as u64;
    let center_id = |c: [i64; 3]| -> u64 {
        let (i, j, k) = (c[0] + 1, c[1] + 1, c[2] + 1);
        n_corners + (i + (n[0] + 2) * (j + (n[1] + 2) * k)) as u64
    };
    let raw_pos = |id: u64| -> Vec3 {
        if id < n_corners {
            let id = id as i64;
            let i = id % (n[0] + 1);
            let j = (id / (n[0] + 1)) % (n[1] + 1);
            let k = id / ((n[0] + 1) * (n[1] + 1));
            bounds.min + Vec3::new(i as f64, j as f64, k as f64) * dx
        } else {
            let id = (id - n_corners) as i64;
            let i = id % (n[0] + 2) - 1;
            let j = (id / (n[0] + 2)) % (n[1] + 2) - 1;
            let k = id / ((n[0] + 2) * (n[1] + 2)) - 1;
            bounds.min + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * dx
        }
    };

    let mut raw_tets: Vec<[u64; 4]> = Vec::new();
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for ia in -1..n[a] {
            for ib in 0..n[b] {
                for ic in 0..n[c] {
                    let mut c1 = [0i64; 3];
                    c1[a] = ia;
                    c1[b] = ib;
                    c1[c] = ic;
                    let mut c2 = c1;
                    c2[a] += 1;
                    let corner = |db: i64, dc: i64| {
                        let mut q = [0i64; 3];
                        q[a] = ia + 1;
                        q[b] = ib + db;
                        q[c] = ic + dc;
                        corner_id(q[0], q[1], q[2])
                    };
                    let edges = [
                        (corner(0, 0), corner(1, 0)),
                        (corner(1, 0), corner(1, 1)),
                        (corner(1, 1), corner(0, 1)),
                        (corner(0, 1), corner(0, 0)),
                    ];
                    for (p, q) in edges {
                        raw_tets.push([center_id(c1), center_id(c2), p, q]);
                    }
                }
            }
        }
    }

    // Compact to the nodes actually used, in ascending raw id order.
    let mut used: Vec<u64> = raw_tets.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<u64, u32> = used.iter().enumerate().map(|(i, &r)| (r, i as u32)).collect();
    let positions: Vec<Vec3> = used.iter().map(|&r| raw_pos(r)).collect();
    let tets: Vec<[u32; 4]> = raw_tets
        .iter()
        .map(|t| orient(t.map(|r| remap[&r]), &positions))
        .collect();

    let mesh = TetMesh::from_tets(positions.len(), tets)?;
    Ok((mesh, positions))
}

fn orient(mut t: [u32; 4], pos: &[Vec3]) -> [u32; 4] {
    let v = tet_volume(
        &pos[t[0] as usize],
        &pos[t[1] as usize],
        &pos[t[2] as usize],
        &pos[t[3] as usize],
    );
    if v < 0.0 {
        t.swap(2, 3);
    }
    t
}

/// Node-level record of a 1→8 refinement: every node past the parent node
/// count is the midpoint of a parent edge. Applying it to another frame's
/// parent positions yields that frame's refined positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    pub parent_nodes: usize,
    pub midpoints: Vec<(u32, u32)>,
}

impl Refinement {
    pub fn refine_positions(&self, parent: &[Vec3]) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.parent_nodes + self.midpoints.len());
        out.extend_from_slice(&parent[..self.parent_nodes]);
        out.extend(
            self.midpoints
                .iter()
                .map(|&(a, b)| (parent[a as usize] + parent[b as usize]) * 0.5),
        );
        out
    }
}

/// Regular 1→8 refinement through edge midpoints. The inner octahedron of
/// each tet is split along its shortest diagonal; children keep the parent's
/// (positive) orientation.
pub fn subdivide(mesh: &TetMesh, pos: &[Vec3]) -> (TetMesh, Vec<Vec3>, Refinement) {
    let n0 = mesh.n_nodes();
    let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
    let mut midpoints = Vec::new();
    let mut midpoint = |a: u32, b: u32| -> u32 {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            midpoints.push(key);
            (n0 + midpoints.len() - 1) as u32
        })
    };

    let mut child_tets: Vec<[u32; 4]> = Vec::with_capacity(mesh.n_tets() * 8);
    for t in mesh.tets() {
        let [v0, v1, v2, v3] = *t;
        let m01 = midpoint(v0, v1);
        let m02 = midpoint(v0, v2);
        let m03 = midpoint(v0, v3);
        let m12 = midpoint(v1, v2);
        let m13 = midpoint(v1, v3);
        let m23 = midpoint(v2, v3);
        child_tets.push([v0, m01, m02, m03]);
        child_tets.push([m01, v1, m12, m13]);
        child_tets.push([m02, m12, v2, m23]);
        child_tets.push([m03, m13, m23, v3]);

        // Octahedron opposite pairs: (m01,m23), (m02,m13), (m03,m12).
        let p = |a: u32, b: u32| (pos[a as usize] + pos[b as usize]) * 0.5;
        let diag_len = [
            (p(v0, v1) - p(v2, v3)).norm_squared(),
            (p(v0, v2) - p(v1, v3)).norm_squared(),
            (p(v0, v3) - p(v1, v2)).norm_squared(),
        ];
        let pairs = [(m01, m23), (m02, m13), (m03, m12)];
        let mut best = 0;
        for d in 1..3 {
            if diag_len[d] < diag_len[best] {
                best = d;
            }
        }
        let (a, b) = pairs[best];
        let (p0, p1) = pairs[(best + 1) % 3];
        let (q0, q1) = pairs[(best + 2) % 3];
        let ring = [p0, q0, p1, q1];
        for r in 0..4 {
            child_tets.push([a, b, ring[r], ring[(r + 1) % 4]]);
        }
    }

    let refinement = Refinement {
        parent_nodes: n0,
        midpoints,
    };
    let new_pos = refinement.refine_positions(pos);
    let tets = child_tets.into_iter().map(|t| orient(t, &new_pos)).collect();
    let mesh = TetMesh::from_tets(new_pos.len(), tets).expect("refinement of a valid mesh is valid");
    (mesh, new_pos, refinement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tet_positions;

    fn volumes(mesh: &TetMesh, pos: &[Vec3]) -> Vec<f64> {
        mesh.tets()
            .iter()
            .map(|t| {
                let v = tet_positions(t, pos);
                tet_volume(&v[0], &v[1], &v[2], &v[3])
            })
            .collect()
    }

    fn unit_box() -> Aabb {
        Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn unit_cube_lattice_has_equal_positive_volumes() {
        let (mesh, pos) = generate_bcc_lattice(&unit_box(), 0.5).unwrap();
        assert!(mesh.n_tets() > 0);
        let vols = volumes(&mesh, &pos);
        let expect = 0.5f64.powi(3) / 12.0;
        for v in vols {
            assert!((v - expect).abs() < 1e-15, "{v}");
        }
    }

    #[test]
    fn oversized_cell_is_an_error() {
        assert!(matches!(
            generate_bcc_lattice(&unit_box(), 1.5),
            Err(Error::BoundsTooSmall { .. })
        ));
        assert!(generate_bcc_lattice(&unit_box(), 0.0).is_err());
    }

    #[test]
    fn lattice_volume_matches_box_plus_boundary_pyramids() {
        let b = Aabb::new(Vec3::new(-0.2, 0.1, 0.3), Vec3::new(0.5, 0.6, 1.2));
        let dx = 0.1;
        let (mesh, pos) = generate_bcc_lattice(&b, dx).unwrap();
        let n = [7.0, 5.0, 9.0];
        // box cells + one outer pyramid (dx³/6) over every boundary cell face
        let faces = 2.0 * (n[0] * n[1] + n[1] * n[2] + n[0] * n[2]);
        let exact = n[0] * n[1] * n[2] * dx.powi(3) + faces * dx.powi(3) / 6.0;
        let total: f64 = volumes(&mesh, &pos).iter().sum();
        assert!(((total - exact) / exact).abs() <= 1e-12, "{total} vs {exact}");
    }

    #[test]
    fn single_tet_refines_into_eight_partitioning_children() {
        let pos = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let mesh = TetMesh::from_tets(4, vec![[0, 1, 2, 3]]).unwrap();
        let (m1, p1, r1) = subdivide(&mesh, &pos);
        assert_eq!(m1.n_tets(), 8);
        assert_eq!(r1.midpoints.len(), 6);
        let vols = volumes(&m1, &p1);
        assert!(vols.iter().all(|&v| v > 0.0));
        let total: f64 = vols.iter().sum();
        assert!((total - 1.0 / 6.0).abs() <= 1e-12 / 6.0);
        let (m2, _, _) = subdivide(&m1, &p1);
        assert_eq!(m2.n_tets(), 64);
    }

    #[test]
    fn refinement_replays_on_other_frames() {
        let (mesh, pos) = generate_bcc_lattice(&unit_box(), 0.5).unwrap();
        let (_, fine, r) = subdivide(&mesh, &pos);
        let shifted: Vec<Vec3> = pos.iter().map(|p| p + Vec3::new(1.0, 2.0, 3.0)).collect();
        let fine_shifted = r.refine_positions(&shifted);
        for (a, b) in fine.iter().zip(&fine_shifted) {
            assert!((b - a - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        }
    }
}
