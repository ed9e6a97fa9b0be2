use crate::{Error, Result};

/// Sentinel for "no tet" in face adjacency arrays.
pub const NO_TET: u32 = u32::MAX;

/// Static topology of a tetrahedral mesh, shared by every animation frame.
///
/// Local face `f` of a tet is the face opposite its local vertex `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct TetMesh {
    n_nodes: usize,
    tets: Vec<[u32; 4]>,
    face_neighbors: Vec<[u32; 4]>,
    node_tet_offsets: Vec<u32>,
    node_tets: Vec<u32>,
    boundary_faces: Vec<(u32, u8)>,
}

impl TetMesh {
    /// Builds the adjacency structures. Fails if a tet repeats a node, a node
    /// id is out of range, or a face is shared by more than two tets.
    pub fn from_tets(n_nodes: usize, tets: Vec<[u32; 4]>) -> Result<Self> {
        for (i, t) in tets.iter().enumerate() {
            if t.iter().any(|&n| n as usize >= n_nodes) {
                return Err(Error::InvalidMesh(format!("tet {i} references a node >= {n_nodes}")));
            }
            for a in 0..4 {
                for b in a + 1..4 {
                    if t[a] == t[b] {
                        return Err(Error::InvalidMesh(format!("tet {i} repeats node {}", t[a])));
                    }
                }
            }
        }

        let mut faces: Vec<([u32; 3], u32, u8)> = Vec::with_capacity(tets.len() * 4);
        for (i, t) in tets.iter().enumerate() {
            for f in 0..4 {
                faces.push((face_key(t, f), i as u32, f as u8));
            }
        }
        faces.sort_unstable();

        let mut face_neighbors = vec![[NO_TET; 4]; tets.len()];
        let mut boundary_faces = Vec::new();
        let mut i = 0;
        while i < faces.len() {
            let mut j = i + 1;
            while j < faces.len() && faces[j].0 == faces[i].0 {
                j += 1;
            }
            match j - i {
                1 => boundary_faces.push((faces[i].1, faces[i].2)),
                2 => {
                    let (_, ta, fa) = faces[i];
                    let (_, tb, fb) = faces[i + 1];
                    face_neighbors[ta as usize][fa as usize] = tb;
                    face_neighbors[tb as usize][fb as usize] = ta;
                }
                n => {
                    return Err(Error::InvalidMesh(format!(
                        "face {:?} is shared by {n} tets",
                        faces[i].0
                    )))
                }
            }
            i = j;
        }
        boundary_faces.sort_unstable();

        let mut counts = vec![0u32; n_nodes + 1];
        for t in &tets {
            for &n in t {
                counts[n as usize + 1] += 1;
            }
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let node_tet_offsets = counts.clone();
        let mut cursor = counts;
        let mut node_tets = vec![0u32; tets.len() * 4];
        for (i, t) in tets.iter().enumerate() {
            for &n in t {
                let c = &mut cursor[n as usize];
                node_tets[*c as usize] = i as u32;
                *c += 1;
            }
        }

        Ok(Self {
            n_nodes,
            tets,
            face_neighbors,
            node_tet_offsets,
            node_tets,
            boundary_faces,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tets(&self) -> &[[u32; 4]] {
        &self.tets
    }

    pub fn tet(&self, t: usize) -> &[u32; 4] {
        &self.tets[t]
    }

    /// Raw per-face neighbor array, [`NO_TET`] on the mesh exterior.
    pub fn face_adjacency(&self, t: usize) -> &[u32; 4] {
        &self.face_neighbors[t]
    }

    /// Existing face neighbors of `t`, in local face order.
    pub fn face_neighbors(&self, t: usize) -> impl Iterator<Item = u32> + '_ {
        self.face_neighbors[t].iter().copied().filter(|&n| n != NO_TET)
    }

    pub fn is_boundary(&self, t: usize) -> bool {
        self.face_neighbors[t].contains(&NO_TET)
    }

    /// `(tet, local face)` pairs on the mesh exterior, sorted.
    pub fn boundary_faces(&self) -> &[(u32, u8)] {
        &self.boundary_faces
    }

    pub fn tets_of_node(&self, n: usize) -> &[u32] {
        let a = self.node_tet_offsets[n] as usize;
        let b = self.node_tet_offsets[n + 1] as usize;
        &self.node_tets[a..b]
    }

    /// Tets sharing at least one node with `t` (excluding `t`), sorted.
    pub fn node_neighbors(&self, t: usize) -> Vec<u32> {
        let mut out: Vec<u32> = self.tets[t]
            .iter()
            .flat_map(|&n| self.tets_of_node(n as usize).iter().copied())
            .filter(|&o| o as usize != t)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Unique undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = self
            .tets
            .iter()
            .flat_map(|t| {
                [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)].map(|(a, b)| {
                    let (x, y) = (t[a], t[b]);
                    (x.min(y), x.max(y))
                })
            })
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }
}

/// Sorted node triple of local face `f` (the face opposite vertex `f`).
pub(crate) fn face_key(t: &[u32; 4], f: usize) -> [u32; 3] {
    let mut k = [0u32; 3];
    let mut j = 0;
    for (i, &n) in t.iter().enumerate() {
        if i != f {
            k[j] = n;
            j += 1;
        }
    }
    k.sort_unstable();
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_tets_share_a_face() {
        let m = TetMesh::from_tets(5, vec![[0, 1, 2, 3], [1, 2, 3, 4]]).unwrap();
        assert_eq!(m.face_adjacency(0)[0], 1);
        assert_eq!(m.face_adjacency(1)[3], 0);
        assert_eq!(m.boundary_faces().len(), 6);
        assert_eq!(m.node_neighbors(0), vec![1]);
        assert_eq!(m.edges().len(), 9);
    }

    #[test]
    fn rejects_repeated_node() {
        assert!(matches!(
            TetMesh::from_tets(4, vec![[0, 1, 1, 3]]),
            Err(Error::InvalidMesh(_))
        ));
    }

    #[test]
    fn rejects_overshared_face() {
        let r = TetMesh::from_tets(6, vec![[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]]);
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }
}
