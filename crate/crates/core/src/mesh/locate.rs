use super::{mean_edge_length, tet_positions, Aabb, BarycentricMap, TetMesh};
use crate::Vec3;

/// Barycentric slack accepted by point location.
pub const BARY_EPS: f64 = 1e-9;

/// Uniform hash grid over tet bounding boxes for one frame's positions.
#[derive(Clone, Debug)]
pub struct PointLocator {
    bounds: Aabb,
    cell: f64,
    dims: [usize; 3],
    offsets: Vec<u32>,
    items: Vec<u32>,
    maps: Vec<Option<BarycentricMap>>,
}

impl PointLocator {
    /// Cell size is the mean tet edge length, enlarged if the grid would
    /// otherwise exceed eight cells per tet.
    pub fn new(mesh: &TetMesh, pos: &[Vec3]) -> Self {
        let maps: Vec<Option<BarycentricMap>> = mesh
            .tets()
            .iter()
            .map(|t| BarycentricMap::new(&tet_positions(t, pos)))
            .collect();
        let Some(bounds) = Aabb::from_points(pos.iter()) else {
            return Self {
                bounds: Aabb::new(Vec3::zeros(), Vec3::zeros()),
                cell: 1.0,
                dims: [0; 3],
                offsets: vec![0],
                items: Vec::new(),
                maps,
            };
        };
        let ext = bounds.extent();
        let mut cell = mean_edge_length(mesh, pos).max(1e-12);
        let budget = (8 * mesh.n_tets()).max(64) as f64;
        loop {
            let cells: f64 = (0..3).map(|a| (ext[a] / cell).floor() + 1.0).product();
            if cells <= budget {
                break;
            }
            cell *= 1.25;
        }
        let dims = [0, 1, 2].map(|a| (ext[a] / cell).floor() as usize + 1);
        let n_cells = dims[0] * dims[1] * dims[2];

        let cell_range = |t: &[u32; 4]| {
            let v = tet_positions(t, pos);
            let b = Aabb::from_points(v.iter()).unwrap();
            let lo = [0, 1, 2].map(|a| (((b.min[a] - bounds.min[a]) / cell).floor() as usize).min(dims[a] - 1));
            let hi = [0, 1, 2].map(|a| (((b.max[a] - bounds.min[a]) / cell).floor() as usize).min(dims[a] - 1));
            (lo, hi)
        };

        let mut counts = vec![0u32; n_cells + 1];
        for t in mesh.tets() {
            let (lo, hi) = cell_range(t);
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        counts[1 + i + dims[0] * (j + dims[1] * k)] += 1;
                    }
                }
            }
        }
        for c in 1..counts.len() {
            counts[c] += counts[c - 1];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut items = vec![0u32; *offsets.last().unwrap() as usize];
        for (ti, t) in mesh.tets().iter().enumerate() {
            let (lo, hi) = cell_range(t);
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        let c = &mut cursor[i + dims[0] * (j + dims[1] * k)];
                        items[*c as usize] = ti as u32;
                        *c += 1;
                    }
                }
            }
        }

        Self {
            bounds,
            cell,
            dims,
            offsets,
            items,
            maps,
        }
    }

    /// Tet containing `p` and its barycentric coordinates (each within
    /// `[-BARY_EPS, 1 + BARY_EPS]`, summing to 1), or `None` off the mesh.
    /// On shared faces the tet with the largest minimum coordinate wins,
    /// ties going to the lower id.
    pub fn locate(&self, p: &Vec3) -> Option<(u32, [f64; 4])> {
        if self.dims[0] == 0 {
            return None;
        }
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let r = (p[a] - self.bounds.min[a]) / self.cell;
            if !(r >= -1e-9) || r > self.dims[a] as f64 + 1e-9 {
                return None;
            }
            idx[a] = (r.max(0.0).floor() as usize).min(self.dims[a] - 1);
        }
        let c = idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2]);
        let cands = &self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize];
        let mut best: Option<(u32, [f64; 4], f64)> = None;
        for &t in cands {
            let Some(map) = &self.maps[t as usize] else { continue };
            let l = map.coords(p);
            let m = l.iter().copied().fold(f64::INFINITY, f64::min);
            if m < -BARY_EPS {
                continue;
            }
            match best {
                Some((bt, _, bm)) if bm > m || (bm == m && bt < t) => {}
                _ => best = Some((t, l, m)),
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    pub fn n_tets(&self) -> usize {
        self.maps.len()
    }
}

/// Free-function form of [`PointLocator::locate`].
pub fn locate_point(locator: &PointLocator, p: &Vec3) -> Option<(u32, [f64; 4])> {
    locator.locate(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{centroid, generate_bcc_lattice, subdivide};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tet_centroid(mesh: &TetMesh, pos: &[Vec3], t: usize) -> Vec3 {
        centroid(&tet_positions(mesh.tet(t), pos))
    }

    fn containing(mesh: &TetMesh, pos: &[Vec3], p: &Vec3) -> Vec<u32> {
        (0..mesh.n_tets())
            .filter(|&t| {
                let m = BarycentricMap::new(&tet_positions(mesh.tet(t), pos)).unwrap();
                m.coords(p).iter().all(|&l| l >= -BARY_EPS)
            })
            .map(|t| t as u32)
            .collect()
    }

    #[test]
    fn centroid_locates_its_own_tet() {
        let (mesh, pos) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)), 0.25).unwrap();
        let loc = PointLocator::new(&mesh, &pos);
        for t in 0..mesh.n_tets() {
            let (found, l) = loc.locate(&tet_centroid(&mesh, &pos, t)).unwrap();
            assert_eq!(found as usize, t);
            for x in l {
                assert!((x - 0.25).abs() < 1e-9);
            }
        }
        assert!(loc.locate(&Vec3::new(10.0, 0.5, 0.5)).is_none());
    }

    #[test]
    fn agrees_with_exhaustive_scan() {
        let (m0, p0) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::new(1.0, 0.7, 0.8)), 0.3).unwrap();
        let (mesh, pos, _) = subdivide(&m0, &p0);
        let loc = PointLocator::new(&mesh, &pos);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = Vec3::new(
                rng.gen_range(-0.4..1.4),
                rng.gen_range(-0.4..1.1),
                rng.gen_range(-0.4..1.2),
            );
            let expect = containing(&mesh, &pos, &p);
            match loc.locate(&p) {
                None => assert!(expect.is_empty(), "missed {p:?}: {expect:?}"),
                Some((t, l)) => {
                    assert!(expect.contains(&t));
                    assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
