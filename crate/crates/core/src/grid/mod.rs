//! Background Eulerian solver on a staggered (MAC) grid with a level-set
//! water surface.

mod advect;
mod io;
mod levelset;
mod project;

pub use io::{read_grid, write_grid};
pub use levelset::{reinitialize, Marker, MarkerConfig};
pub use project::{discrete_divergence, pressure_matrix_apply, PressureSystem, ProjectStats};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::SolidField;
use crate::vof::GridSampler;
use crate::Vec3;

/// Samples on a regular lattice; sample `(i, j, k)` sits at
/// `origin + (ijk + offset)·dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field3 {
    pub dims: [usize; 3],
    pub offset: Vec3,
    pub data: Vec<f64>,
}

impl Field3 {
    pub fn new(dims: [usize; 3], offset: Vec3, value: f64) -> Self {
        Self {
            dims,
            offset,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.idx(i, j, k);
        self.data[n] = v;
    }

    pub fn coords(&self, n: usize) -> [usize; 3] {
        let i = n % self.dims[0];
        let j = (n / self.dims[0]) % self.dims[1];
        let k = n / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    /// World position of sample `(i, j, k)`.
    pub fn position(&self, origin: &Vec3, dx: f64, ijk: [usize; 3]) -> Vec3 {
        origin + (Vec3::new(ijk[0] as f64, ijk[1] as f64, ijk[2] as f64) + self.offset) * dx
    }

    /// Trilinear interpolation; queries outside the sample range are clamped
    /// to it.
    pub fn sample(&self, origin: &Vec3, dx: f64, p: &Vec3) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let x = ((p[a] - origin[a]) / dx - self.offset[a]).clamp(0.0, (self.dims[a] - 1) as f64);
            if self.dims[a] < 2 {
                continue;
            }
            let b = (x.floor() as usize).min(self.dims[a] - 2);
            base[a] = b;
            frac[a] = x - b as f64;
        }
        let [i, j, k] = base;
        let di = (self.dims[0] > 1) as usize;
        let dj = (self.dims[1] > 1) as usize;
        let dk = (self.dims[2] > 1) as usize;
        let [fx, fy, fz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(self.get(i, j, k), self.get(i + di, j, k), fx);
        let c10 = lerp(self.get(i, j + dj, k), self.get(i + di, j + dj, k), fx);
        let c01 = lerp(self.get(i, j, k + dk), self.get(i + di, j, k + dk), fx);
        let c11 = lerp(self.get(i, j + dj, k + dk), self.get(i + di, j + dj, k + dk), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }

    /// The eight samples and weights of the trilinear stencil at `p`.
    pub fn stencil(&self, origin: &Vec3, dx: f64, p: &Vec3) -> [(usize, f64); 8] {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let x = ((p[a] - origin[a]) / dx - self.offset[a]).clamp(0.0, (self.dims[a] - 1) as f64);
            if self.dims[a] < 2 {
                continue;
            }
            let b = (x.floor() as usize).min(self.dims[a] - 2);
            base[a] = b;
            frac[a] = x - b as f64;
        }
        let mut out = [(0usize, 0.0); 8];
        let mut n = 0;
        for dk in 0..2 {
            for dj in 0..2 {
                for di in 0..2 {
                    let i = (base[0] + di).min(self.dims[0] - 1);
                    let j = (base[1] + dj).min(self.dims[1] - 1);
                    let k = (base[2] + dk).min(self.dims[2] - 1);
                    let w = (if di == 1 { frac[0] } else { 1.0 - frac[0] })
                        * (if dj == 1 { frac[1] } else { 1.0 - frac[1] })
                        * (if dk == 1 { frac[2] } else { 1.0 - frac[2] });
                    out[n] = (self.idx(i, j, k), w);
                    n += 1;
                }
            }
        }
        out
    }
}

/// Cylindrical water source. Cells inside the cylinder become water and
/// faces inside it take the inlet velocity while `start ≤ t < stop`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inlet {
    /// Center of the cylinder's base disc.
    pub center: Vec3,
    /// Axis (need not be unit); water leaves along it.
    pub axis: Vec3,
    pub radius: f64,
    pub length: f64,
    /// Speed along the axis (m/s).
    pub speed: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "infinite")]
    pub stop: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl Inlet {
    pub fn phi(&self, p: &Vec3) -> f64 {
        let a = self.axis.normalize();
        let d = p - self.center;
        let along = d.dot(&a);
        let radial = (d - a * along).norm() - self.radius;
        let cap = (along - 0.5 * self.length).abs() - 0.5 * self.length;
        let outside = Vec3::new(radial.max(0.0), cap.max(0.0), 0.0).norm();
        outside + radial.max(cap).min(0.0)
    }

    pub fn velocity(&self) -> Vec3 {
        self.axis.normalize() * self.speed
    }

    pub fn active(&self, t: f64) -> bool {
        t >= self.start && t < self.stop
    }
}

/// Staggered velocities, cell-centered water and solid level sets and
/// pressure. ρ = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MacGrid {
    pub origin: Vec3,
    pub dx: f64,
    pub dims: [usize; 3],
    pub u: Field3,
    pub v: Field3,
    pub w: Field3,
    pub phi_water: Field3,
    pub phi_solid: Field3,
    pub pressure: Field3,
    /// Per face component: whether the face is a solid (Neumann) face.
    pub solid_face: [Vec<bool>; 3],
    /// Solid velocity component on solid faces.
    pub solid_vel: [Vec<f64>; 3],
    pub markers: Vec<Marker>,
}

impl MacGrid {
    /// Empty (all air) grid of `dims` cells with solid domain walls.
    pub fn new(origin: Vec3, dx: f64, dims: [usize; 3]) -> Self {
        let [nx, ny, nz] = dims;
        let u = Field3::new([nx + 1, ny, nz], Vec3::new(0.0, 0.5, 0.5), 0.0);
        let v = Field3::new([nx, ny + 1, nz], Vec3::new(0.5, 0.0, 0.5), 0.0);
        let w = Field3::new([nx, ny, nz + 1], Vec3::new(0.5, 0.5, 0.0), 0.0);
        let cell = Vec3::new(0.5, 0.5, 0.5);
        let big = 3.0 * dx * (nx + ny + nz) as f64;
        let mut g = Self {
            origin,
            dx,
            dims,
            solid_face: [
                vec![false; u.data.len()],
                vec![false; v.data.len()],
                vec![false; w.data.len()],
            ],
            solid_vel: [
                vec![0.0; u.data.len()],
                vec![0.0; v.data.len()],
                vec![0.0; w.data.len()],
            ],
            u,
            v,
            w,
            phi_water: Field3::new(dims, cell, big),
            phi_solid: Field3::new(dims, cell, big),
            pressure: Field3::new(dims, cell, 0.0),
            markers: Vec::new(),
        };
        g.set_solids(&SolidField::default(), 0.0);
        g
    }

    pub fn n_cells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn face(&self, axis: usize) -> &Field3 {
        match axis {
            0 => &self.u,
            1 => &self.v,
            _ => &self.w,
        }
    }

    pub fn face_mut(&mut self, axis: usize) -> &mut Field3 {
        match axis {
            0 => &mut self.u,
            1 => &mut self.v,
            _ => &mut self.w,
        }
    }

    pub fn cell_center(&self, ijk: [usize; 3]) -> Vec3 {
        self.phi_water.position(&self.origin, self.dx, ijk)
    }

    pub fn upper(&self) -> Vec3 {
        self.origin + Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.dx
    }

    pub fn sample_velocity(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            self.u.sample(&self.origin, self.dx, p),
            self.v.sample(&self.origin, self.dx, p),
            self.w.sample(&self.origin, self.dx, p),
        )
    }

    pub fn sample_phi_water(&self, p: &Vec3) -> f64 {
        self.phi_water.sample(&self.origin, self.dx, p)
    }

    pub fn sample_phi_solid(&self, p: &Vec3) -> f64 {
        self.phi_solid.sample(&self.origin, self.dx, p)
    }

    /// Recomputes the solid level set, solid faces and their velocities.
    /// Domain walls are always solid with zero velocity.
    pub fn set_solids(&mut self, solids: &SolidField, t: f64) {
        let (origin, dx) = (self.origin, self.dx);
        let cells = self.phi_solid.clone();
        self.phi_solid.data.par_iter_mut().enumerate().for_each(|(n, phi)| {
            let p = cells.position(&origin, dx, cells.coords(n));
            *phi = solids.phi(&p, t).min(1e30);
        });
        for axis in 0..3 {
            let f = self.face(axis).clone();
            let dims = f.dims;
            let flags: Vec<(bool, f64)> = (0..f.data.len())
                .into_par_iter()
                .map(|n| {
                    let ijk = f.coords(n);
                    if ijk[axis] == 0 || ijk[axis] == dims[axis] - 1 {
                        return (true, 0.0);
                    }
                    let p = f.position(&origin, dx, ijk);
                    if !solids.is_empty() && solids.phi(&p, t) < 0.0 {
                        (true, solids.velocity(&p, t)[axis])
                    } else {
                        (false, 0.0)
                    }
                })
                .collect();
            self.solid_face[axis] = flags.iter().map(|x| x.0).collect();
            self.solid_vel[axis] = flags.iter().map(|x| x.1).collect();
        }
    }

    /// Fills the water level set from a signed-distance function (union with
    /// what is there).
    pub fn add_water(&mut self, phi: impl Fn(&Vec3) -> f64 + Sync) {
        let (origin, dx) = (self.origin, self.dx);
        let f = self.phi_water.clone();
        self.phi_water.data.par_iter_mut().enumerate().for_each(|(n, v)| {
            let p = f.position(&origin, dx, f.coords(n));
            *v = v.min(phi(&p));
        });
    }

    /// Water volume from the level set: each cell contributes
    /// `clamp(½ − φ/dx, 0, 1)·dx³`.
    pub fn water_volume(&self) -> f64 {
        let dx = self.dx;
        crate::det_sum(
            self.phi_water
                .data
                .par_iter()
                .map(|&phi| (0.5 - phi / dx).clamp(0.0, 1.0)),
        ) * dx.powi(3)
    }

    /// Sum of face velocities times face volume, per component.
    pub fn face_momentum(&self) -> Vec3 {
        let cell = self.dx.powi(3);
        Vec3::new(
            self.u.data.iter().sum::<f64>() * cell,
            self.v.data.iter().sum::<f64>() * cell,
            self.w.data.iter().sum::<f64>() * cell,
        )
    }

    /// Adds `g·dt` to every non-solid face.
    pub fn apply_gravity(&mut self, g: &Vec3, dt: f64) {
        for axis in 0..3 {
            let dv = g[axis] * dt;
            if dv == 0.0 {
                continue;
            }
            let solid = std::mem::take(&mut self.solid_face[axis]);
            self.face_mut(axis).data.par_iter_mut().zip(&solid).for_each(|(u, &s)| {
                if !s {
                    *u += dv;
                }
            });
            self.solid_face[axis] = solid;
        }
    }

    /// Applies the inlet for time `t`; returns the level-set volume it added.
    pub fn apply_inlet(&mut self, inlet: &Inlet, t: f64) -> f64 {
        if !inlet.active(t) {
            return 0.0;
        }
        let before = self.water_volume();
        self.add_water(|p| inlet.phi(p));
        let vel = inlet.velocity();
        let (origin, dx) = (self.origin, self.dx);
        for axis in 0..3 {
            let f = self.face(axis).clone();
            let solid = std::mem::take(&mut self.solid_face[axis]);
            self.face_mut(axis).data.par_iter_mut().enumerate().for_each(|(n, u)| {
                if !solid[n] && inlet.phi(&f.position(&origin, dx, f.coords(n))) <= 0.0 {
                    *u = vel[axis];
                }
            });
            self.solid_face[axis] = solid;
        }
        self.water_volume() - before
    }

    /// Sets solid faces to the solid velocity.
    pub fn enforce_solid_faces(&mut self) {
        for axis in 0..3 {
            let solid = std::mem::take(&mut self.solid_face[axis]);
            let vel = std::mem::take(&mut self.solid_vel[axis]);
            for (n, u) in self.face_mut(axis).data.iter_mut().enumerate() {
                if solid[n] {
                    *u = vel[n];
                }
            }
            self.solid_face[axis] = solid;
            self.solid_vel[axis] = vel;
        }
    }

    /// Max |face velocity|.
    pub fn max_speed(&self) -> f64 {
        self.u
            .data
            .iter()
            .chain(&self.v.data)
            .chain(&self.w.data)
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

impl GridSampler for MacGrid {
    fn velocity(&self, p: &Vec3) -> Vec3 {
        self.sample_velocity(p)
    }

    fn phi_water(&self, p: &Vec3) -> f64 {
        self.sample_phi_water(p)
    }
}
