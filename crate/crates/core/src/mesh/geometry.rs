use nalgebra::Matrix3;

use super::TetMesh;
use crate::Vec3;

/// Signed volume of the tetrahedron `(a, b, c, d)`: one sixth of the
/// determinant of its edge matrix. Positive for positively oriented tets.
pub fn tet_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

pub fn tet_positions(tet: &[u32; 4], pos: &[Vec3]) -> [Vec3; 4] {
    [
        pos[tet[0] as usize],
        pos[tet[1] as usize],
        pos[tet[2] as usize],
        pos[tet[3] as usize],
    ]
}

pub fn centroid(v: &[Vec3; 4]) -> Vec3 {
    (v[0] + v[1] + v[2] + v[3]) * 0.25
}

const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub fn mean_edge_length(mesh: &TetMesh, pos: &[Vec3]) -> f64 {
    if mesh.n_tets() == 0 {
        return 0.0;
    }
    let total: f64 = mesh
        .tets()
        .iter()
        .map(|t| {
            let v = tet_positions(t, pos);
            EDGES.iter().map(|&(a, b)| (v[a] - v[b]).norm()).sum::<f64>()
        })
        .sum();
    total / (6 * mesh.n_tets()) as f64
}

pub fn max_edge_length(mesh: &TetMesh, pos: &[Vec3]) -> f64 {
    mesh.tets()
        .iter()
        .flat_map(|t| {
            let v = tet_positions(t, pos);
            EDGES.map(|(a, b)| (v[a] - v[b]).norm())
        })
        .fold(0.0, f64::max)
}

/// Affine map from world space to the barycentric coordinates of one tet.
#[derive(Clone, Copy, Debug)]
pub struct BarycentricMap {
    origin: Vec3,
    inv: Matrix3<f64>,
}

impl BarycentricMap {
    /// `None` for degenerate (zero-volume) tets.
    pub fn new(v: &[Vec3; 4]) -> Option<Self> {
        let m = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
        let inv = m.try_inverse()?;
        if !inv.iter().all(|x| x.is_finite()) {
            return None;
        }
        Some(Self { origin: v[0], inv })
    }

    pub fn coords(&self, p: &Vec3) -> [f64; 4] {
        let l = self.inv * (p - self.origin);
        [1.0 - l.x - l.y - l.z, l.x, l.y, l.z]
    }
}
