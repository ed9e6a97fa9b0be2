//! Surfacing: tet water and spray become spheres, merged with the grid
//! level set and polygonized.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::dumps;
use crate::grid::MacGrid;
use crate::mesh::{tet_volume, QuadratureRule};
use crate::spray::{sphere_radius, SprayParticle};
use crate::vof::WetTet;
use crate::{Error, Result, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceParams {
    /// Cell size of the polygonization grid; `None` uses half the grid dx
    /// (or the mean sample spacing when there is no grid).
    pub cell: Option<f64>,
    /// Quadrature samples emitted per wet tet.
    pub n_samples: usize,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        Self {
            cell: None,
            n_samples: 10,
        }
    }
}

/// A sphere contributing `|x − center| − radius` to the field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splat {
    pub center: Vec3,
    pub radius: f64,
}

/// Quadrature samples of every wet tet, each carrying `water/n`, pulled
/// toward the grid surface when within 1.5 dx of it.
pub fn surface_samples(wet: &[WetTet], grid: Option<&MacGrid>, n: usize) -> Result<Vec<Splat>> {
    let rule = QuadratureRule::new(n)?;
    let per_tet: Vec<Vec<Splat>> = wet
        .par_iter()
        .map(|t| {
            let v = &t.vertices;
            let vol = tet_volume(&v[0], &v[1], &v[2], &v[3]).abs();
            let spacing = (vol / n as f64).cbrt();
            let radius = sphere_radius(t.water / n as f64).max(1.4 * spacing);
            rule.points(v)
                .map(|p| Splat {
                    center: grid.map_or(p, |g| attract(g, p)),
                    radius,
                })
                .collect()
        })
        .collect();
    Ok(per_tet.into_iter().flatten().collect())
}

fn attract(g: &MacGrid, p: Vec3) -> Vec3 {
    let phi = g.sample_phi_water(&p);
    if phi.abs() >= 1.5 * g.dx {
        return p;
    }
    let h = 0.5 * g.dx;
    let grad = Vec3::new(
        g.sample_phi_water(&(p + Vec3::x() * h)) - g.sample_phi_water(&(p - Vec3::x() * h)),
        g.sample_phi_water(&(p + Vec3::y() * h)) - g.sample_phi_water(&(p - Vec3::y() * h)),
        g.sample_phi_water(&(p + Vec3::z() * h)) - g.sample_phi_water(&(p - Vec3::z() * h)),
    );
    let len = grad.norm();
    if len == 0.0 {
        return p;
    }
    p - grad / len * phi.signum() * phi.abs().min(0.5 * g.dx)
}

/// Node-sampled scalar field.
#[derive(Clone, Debug)]
pub struct ScalarGrid {
    pub origin: Vec3,
    pub h: f64,
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(origin: Vec3, h: f64, dims: [usize; 3], value: f64) -> Self {
        Self {
            origin,
            h,
            dims,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.h
    }
}

/// Min-union of sphere distance fields, evaluated within two cells of each
/// sphere; everything else stays at `+h·4`.
pub fn splat(field: &mut ScalarGrid, splats: &[Splat]) {
    let h = field.h;
    let dims = field.dims;
    let origin = field.origin;
    let nslab = dims[2];
    // Bucket splats by the z-slabs they touch so slabs fill independently.
    let mut by_slab: Vec<Vec<u32>> = vec![Vec::new(); nslab];
    for (n, s) in splats.iter().enumerate() {
        let reach = s.radius + 2.0 * h;
        let lo = ((s.center.z - reach - origin.z) / h).floor().max(0.0) as usize;
        let hi = (((s.center.z + reach - origin.z) / h).ceil().max(0.0) as usize).min(nslab - 1);
        for k in lo..=hi.max(lo).min(nslab - 1) {
            by_slab[k].push(n as u32);
        }
    }
    let plane = dims[0] * dims[1];
    field.data.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
        for &n in &by_slab[k] {
            let s = &splats[n as usize];
            let reach = s.radius + 2.0 * h;
            let range = |a: usize| {
                let lo = ((s.center[a] - reach - origin[a]) / h).floor().max(0.0) as usize;
                let hi = ((s.center[a] + reach - origin[a]) / h).ceil().max(0.0) as usize;
                lo..=hi.min(dims[a] - 1)
            };
            for j in range(1) {
                for i in range(0) {
                    let p = origin + Vec3::new(i as f64, j as f64, k as f64) * h;
                    let d = (p - s.center).norm() - s.radius;
                    let v = &mut slab[i + dims[0] * j];
                    if d < *v {
                        *v = d;
                    }
                }
            }
        }
    });
}

/// Triangle mesh with shared vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    /// Whether every edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        self.edge_counts().values().all(|&c| c == 2)
    }

    fn edge_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut e = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *e.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        e
    }

    /// V − E + F of each connected component.
    pub fn euler_characteristics(&self) -> Vec<i64> {
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(p: &mut [u32], mut x: u32) -> u32 {
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        for t in &self.triangles {
            for k in 1..3 {
                let (a, b) = (find(&mut parent, t[0]), find(&mut parent, t[k]));
                if a != b {
                    parent[a.max(b) as usize] = a.min(b);
                }
            }
        }
        let mut comps: HashMap<u32, (i64, i64, i64)> = HashMap::new();
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                if !used[v as usize] {
                    used[v as usize] = true;
                    let r = find(&mut parent, v);
                    comps.entry(r).or_default().0 += 1;
                }
            }
            let r = find(&mut parent, t[0]);
            comps.entry(r).or_default().2 += 1;
        }
        for &(a, _) in self.edge_counts().keys() {
            let r = find(&mut parent, a);
            comps.entry(r).or_default().1 += 1;
        }
        let mut roots: Vec<u32> = comps.keys().copied().collect();
        roots.sort_unstable();
        roots
            .iter()
            .map(|r| {
                let (v, e, f) = comps[r];
                v - e + f
            })
            .collect()
    }
}

const CUBE: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Six tets sharing the 0–7 diagonal; the split is the same in every cube so
/// shared faces match.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Zero-level polygonization by marching tetrahedra. Values exactly zero
/// count as outside. Vertices are shared through their grid edge, so a
/// field that is positive on the boundary gives a closed surface.
pub fn marching_tets(f: &ScalarGrid) -> TriMesh {
    let [nx, ny, nz] = f.dims;
    let mut out = TriMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return out;
    }
    let mut verts: HashMap<(u32, u32), u32> = HashMap::new();
    let mut edge_vertex = |a: usize, b: usize, out: &mut TriMesh| -> u32 {
        let key = (a.min(b) as u32, a.max(b) as u32);
        *verts.entry(key).or_insert_with(|| {
            let pos = |n: usize| {
                let (i, r) = (n % nx, n / nx);
                f.position(i, r % ny, r / ny)
            };
            let (fa, fb) = (f.data[a], f.data[b]);
            let s = fa / (fa - fb);
            out.vertices.push(pos(a) + (pos(b) - pos(a)) * s);
            (out.vertices.len() - 1) as u32
        })
    };
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let c = CUBE.map(|o| f.idx(i + o[0], j + o[1], k + o[2]));
                let inside = c.map(|n| f.data[n] < 0.0);
                if inside.iter().all(|&x| x) || inside.iter().all(|&x| !x) {
                    continue;
                }
                for tet in &KUHN {
                    let n = tet.map(|l| c[l]);
                    let ins: Vec<usize> = (0..4).filter(|&q| f.data[n[q]] < 0.0).collect();
                    let outs: Vec<usize> = (0..4).filter(|&q| f.data[n[q]] >= 0.0).collect();
                    if ins.is_empty() || outs.is_empty() {
                        continue;
                    }
                    let tris: Vec<[u32; 3]> = match ins.len() {
                        1 | 3 => {
                            let (apex, base) = if ins.len() == 1 {
                                (ins[0], &outs)
                            } else {
                                (outs[0], &ins)
                            };
                            vec![[0, 1, 2].map(|q| edge_vertex(n[apex], n[base[q]], &mut out))]
                        }
                        2 => {
                            let mut e = |a: usize, b: usize, out: &mut TriMesh| edge_vertex(n[ins[a]], n[outs[b]], out);
                            let (p00, p01, p11, p10) = (
                                e(0, 0, &mut out),
                                e(0, 1, &mut out),
                                e(1, 1, &mut out),
                                e(1, 0, &mut out),
                            );
                            vec![[p00, p01, p11], [p00, p11, p10]]
                        }
                        _ => Vec::new(),
                    };
                    let dir = node_pos(f, n[outs[0]]) - node_pos(f, n[ins[0]]);
                    for mut t in tris {
                        let (a, b, cc) = (
                            out.vertices[t[0] as usize],
                            out.vertices[t[1] as usize],
                            out.vertices[t[2] as usize],
                        );
                        if (b - a).cross(&(cc - a)).dot(&dir) < 0.0 {
                            t.swap(1, 2);
                        }
                        out.triangles.push(t);
                    }
                }
            }
        }
    }
    out
}

fn node_pos(f: &ScalarGrid, n: usize) -> Vec3 {
    let nx = f.dims[0];
    let (i, r) = (n % nx, n / nx);
    f.position(i, r % f.dims[1], r / f.dims[1])
}

/// Surfaces one frame's water.
pub fn surface(
    wet: &[WetTet],
    particles: &[SprayParticle],
    grid: Option<&MacGrid>,
    params: &SurfaceParams,
) -> Result<TriMesh> {
    let mut splats = surface_samples(wet, grid, params.n_samples)?;
    splats.extend(particles.iter().map(|p| Splat {
        center: p.position,
        radius: p.radius,
    }));
    let grid_water = grid.filter(|g| g.phi_water.data.iter().any(|&v| v < 0.0));
    if splats.is_empty() && grid_water.is_none() {
        return Ok(TriMesh::default());
    }
    let h = match (params.cell, grid) {
        (Some(h), _) => h,
        (None, Some(g)) => 0.5 * g.dx,
        (None, None) => {
            let r = splats.iter().map(|s| s.radius).fold(f64::INFINITY, f64::min);
            (0.5 * r).max(1e-6)
        }
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidMesh(format!("surface cell size {h} must be positive")));
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for s in &splats {
        lo = lo.inf(&(s.center - Vec3::repeat(s.radius)));
        hi = hi.sup(&(s.center + Vec3::repeat(s.radius)));
    }
    if let Some(g) = grid_water {
        lo = lo.inf(&g.origin);
        hi = hi.sup(&g.upper());
    }
    let origin = lo - Vec3::repeat(2.0 * h);
    let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / h).ceil() as usize + 5);
    let n_nodes: usize = dims.iter().product();
    if n_nodes > 1 << 28 {
        return Err(Error::InvalidMesh(format!(
            "surface grid {dims:?} too large; raise the cell size"
        )));
    }
    let mut field = ScalarGrid::new(origin, h, dims, 4.0 * h);
    splat(&mut field, &splats);
    if let Some(g) = grid_water {
        let [nx, ny, _] = dims;
        field.data.par_iter_mut().enumerate().for_each(|(n, v)| {
            let (i, r) = (n % nx, n / nx);
            let p = origin + Vec3::new(i as f64, (r % ny) as f64, (r / ny) as f64) * h;
            *v = v.min(g.sample_phi_water(&p));
        });
    }
    // keep the outer layer outside so the surface closes
    let [nx, ny, nz] = dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                    let n = field.idx(i, j, k);
                    field.data[n] = field.data[n].max(h);
                }
            }
        }
    }
    Ok(marching_tets(&field))
}

/// Surfaces frame `frame` from the dumps in `dir`.
pub fn surface_frame(dir: &Path, frame: usize, params: &SurfaceParams) -> Result<TriMesh> {
    let d = dumps::paths(dir, frame);
    if !d.water.exists() && !d.particles.exists() && !d.grid.exists() {
        return Err(Error::MissingDump(d.water));
    }
    let wet = if d.water.exists() {
        dumps::load_water(&d.water)?.1
    } else {
        Vec::new()
    };
    let particles = if d.particles.exists() {
        dumps::load_particles(&d.particles)?
    } else {
        Vec::new()
    };
    let grid = if d.grid.exists() {
        Some(dumps::load_grid(&d.grid)?)
    } else {
        None
    };
    surface(&wet, &particles, grid.as_ref(), params)
}
