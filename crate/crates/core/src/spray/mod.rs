//! Spray particles: water that left the mesh, flying ballistically until it
//! lands in wet tets or in grid water.

mod io;

pub use io::{read_particles, write_particles};

use std::f64::consts::PI;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bake::FrameBake;
use crate::grid::{Field3, MacGrid};
use crate::mesh::{Aabb, PointLocator, SolidField};
use crate::vof::{LedgerEntry, WaterState, EPS_W};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SprayParticle {
    pub position: Vec3,
    pub velocity: Vec3,
    pub radius: f64,
    pub id: u64,
}

impl SprayParticle {
    pub fn volume(&self) -> f64 {
        sphere_volume(self.radius)
    }
}

pub fn sphere_volume(r: f64) -> f64 {
    4.0 / 3.0 * PI * r * r * r
}

/// Radius of the sphere holding `volume`.
pub fn sphere_radius(volume: f64) -> f64 {
    (3.0 * volume / (4.0 * PI)).cbrt()
}

/// Seeded jitter stream; the same seed and call sequence give the same
/// offsets.
#[derive(Clone, Debug)]
pub struct JitterRng {
    rng: ChaCha8Rng,
}

impl JitterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform point in the ball of radius `r` (rejection from the cube).
    pub fn in_ball(&mut self, r: f64) -> Vec3 {
        if r <= 0.0 {
            return Vec3::zeros();
        }
        loop {
            let p = Vec3::new(
                self.rng.gen_range(-1.0..1.0),
                self.rng.gen_range(-1.0..1.0),
                self.rng.gen_range(-1.0..1.0),
            );
            if p.norm_squared() <= 1.0 {
                return p * r;
            }
        }
    }
}

/// Particle bookkeeping carried by the simulation.
#[derive(Clone, Debug)]
pub struct Spray {
    pub particles: Vec<SprayParticle>,
    pub next_id: u64,
    pub rng: JitterRng,
}

impl Spray {
    pub fn new(seed: u64) -> Self {
        Self {
            particles: Vec::new(),
            next_id: 0,
            rng: JitterRng::new(seed),
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.particles.iter().fold(0.0, |a, p| a + p.volume())
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.particles.iter().map(|p| p.velocity * p.volume()).sum()
    }

    /// One particle per ledger entry. Returns the volume actually spawned
    /// (it can differ from the entry sum by round-off of the radius).
    pub fn spawn(&mut self, entries: &[LedgerEntry], jitter_frac: f64, max_edge: f64) -> f64 {
        let jr = jitter_frac * max_edge;
        let mut spawned = 0.0;
        for e in entries {
            if !(e.volume > 0.0) {
                warn!("skipping ledger entry with volume {}", e.volume);
                continue;
            }
            let mut position = e.position;
            if let Some(n) = e.normal {
                position += n * jr;
            }
            position += self.rng.in_ball(jr);
            let p = SprayParticle {
                position,
                velocity: e.momentum / e.volume,
                radius: sphere_radius(e.volume),
                id: self.next_id,
            };
            self.next_id += 1;
            spawned += p.volume();
            self.particles.push(p);
        }
        spawned
    }
}

/// Pushes a particle out of solids and domain walls: where `φ < r` it is
/// moved to `φ = r` and its inward normal velocity removed.
pub fn collide(p: &mut SprayParticle, solids: &SolidField, t: f64, walls: Option<&Aabb>) {
    if !solids.is_empty() {
        let (phi, n) = solids.query(&p.position, t);
        if phi < p.radius {
            p.position += n * (p.radius - phi);
            let rel = p.velocity - solids.velocity(&p.position, t);
            let vn = rel.dot(&n);
            if vn < 0.0 {
                p.velocity -= n * vn;
            }
        }
    }
    if let Some(b) = walls {
        for a in 0..3 {
            let (lo, hi) = (b.min[a] + p.radius, b.max[a] - p.radius);
            if p.position[a] < lo {
                p.position[a] = lo;
                p.velocity[a] = p.velocity[a].max(0.0);
            } else if p.position[a] > hi {
                p.position[a] = hi;
                p.velocity[a] = p.velocity[a].min(0.0);
            }
        }
    }
}

/// Position update with collision (the advection phase).
pub fn move_particles(ps: &mut [SprayParticle], solids: &SolidField, t: f64, dt: f64, walls: Option<&Aabb>) {
    ps.par_iter_mut().for_each(|p| {
        p.position += p.velocity * dt;
        collide(p, solids, t, walls);
    });
}

/// `v += g·dt` (the external-force phase).
pub fn accelerate_particles(ps: &mut [SprayParticle], gravity: &Vec3, dt: f64) {
    ps.par_iter_mut().for_each(|p| p.velocity += gravity * dt);
}

/// Symplectic Euler: `v += g·dt`, then `x += v·dt`, then collision.
pub fn advect_particles(
    ps: &mut [SprayParticle],
    gravity: &Vec3,
    solids: &SolidField,
    t: f64,
    dt: f64,
    walls: Option<&Aabb>,
) {
    accelerate_particles(ps, gravity, dt);
    move_particles(ps, solids, t, dt, walls);
}

/// Volume and momentum handed from particles to another representation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Delivered {
    pub volume: f64,
    pub momentum: Vec3,
    pub count: usize,
}

/// Particles inside wet fluid tets are absorbed by them.
pub fn reincorporate_to_vof(
    ps: &mut Vec<SprayParticle>,
    state: &mut WaterState,
    frame: &FrameBake,
    locator: &PointLocator,
) -> Delivered {
    let hits: Vec<Option<u32>> = ps
        .par_iter()
        .map(|p| {
            locator.locate(&p.position).and_then(|(t, _)| {
                let t = t as usize;
                (frame.is_fluid(t) && state.water[t] > EPS_W).then_some(t as u32)
            })
        })
        .collect();
    let mut d = Delivered::default();
    let mut kept = Vec::with_capacity(ps.len());
    for (p, hit) in ps.drain(..).zip(hits) {
        match hit {
            Some(t) => {
                let v = p.volume();
                state.water[t as usize] += v;
                state.momentum[t as usize] += p.velocity * v;
                d.volume += v;
                d.momentum += p.velocity * v;
                d.count += 1;
            }
            None => kept.push(p),
        }
    }
    *ps = kept;
    d
}

/// Particles inside grid water (`φ_water < 0`) merge into it: the level set
/// is min-blended with the particle sphere over a 2r halo, the containing
/// stencil is lowered until `φ(x_p) ≤ −r`, and the momentum difference
/// `V·(v_p − u_grid)` is spread over the enclosing faces. `expansion` adds a
/// radial impulse `expansion·|v_p|` on faces within `r`.
pub fn reincorporate_to_grid(ps: &mut Vec<SprayParticle>, grid: &mut MacGrid, expansion: f64) -> Delivered {
    let mut d = Delivered::default();
    let mut kept = Vec::with_capacity(ps.len());
    let cell_vol = grid.dx.powi(3);
    for p in ps.drain(..) {
        if grid.sample_phi_water(&p.position) >= 0.0 {
            kept.push(p);
            continue;
        }
        let v = p.volume();
        let u_grid = grid.sample_velocity(&p.position);
        blend_sphere(grid, &p.position, p.radius);

        let dm = (p.velocity - u_grid) * v;
        for a in 0..3 {
            let (origin, dx) = (grid.origin, grid.dx);
            let st = grid.face(a).stencil(&origin, dx, &p.position);
            let free: f64 = st.iter().filter(|(n, _)| !grid.solid_face[a][*n]).map(|x| x.1).sum();
            if free <= 0.0 {
                continue;
            }
            let solid = std::mem::take(&mut grid.solid_face[a]);
            let data = &mut grid.face_mut(a).data;
            for (n, w) in st {
                if !solid[n] {
                    data[n] += w / free * dm[a] / cell_vol;
                }
            }
            grid.solid_face[a] = solid;
        }
        if expansion > 0.0 {
            expand(grid, &p, expansion * p.velocity.norm());
        }
        d.volume += v;
        d.momentum += p.velocity * v;
        d.count += 1;
    }
    *ps = kept;
    d
}

fn blend_sphere(grid: &mut MacGrid, c: &Vec3, r: f64) {
    let dx = grid.dx;
    let f = &grid.phi_water;
    let g = (c - grid.origin) / dx;
    let reach = (2.0 * r / dx).max(1.0);
    let lo = |a: usize| (g[a] - 0.5 - reach).floor().max(0.0) as usize;
    let hi = |a: usize| ((g[a] - 0.5 + reach).ceil().max(0.0) as usize).min(f.dims[a] - 1);
    let (li, hi_) = ([lo(0), lo(1), lo(2)], [hi(0), hi(1), hi(2)]);
    let origin = grid.origin;
    for k in li[2]..=hi_[2] {
        for j in li[1]..=hi_[1] {
            for i in li[0]..=hi_[0] {
                let n = grid.phi_water.idx(i, j, k);
                let p = grid.phi_water.position(&origin, dx, [i, j, k]);
                let s = (p - c).norm() - r;
                if s < grid.phi_water.data[n] {
                    grid.phi_water.data[n] = s;
                }
            }
        }
    }
    let at = grid.sample_phi_water(c);
    if at > -r {
        let st = grid.phi_water.stencil(&origin, dx, c);
        for (n, _) in st {
            grid.phi_water.data[n] -= at + r;
        }
    }
}

fn expand(grid: &mut MacGrid, p: &SprayParticle, magnitude: f64) {
    let (origin, dx) = (grid.origin, grid.dx);
    for a in 0..3 {
        let f = Field3 {
            data: Vec::new(),
            ..*grid.face(a)
        };
        let solid = std::mem::take(&mut grid.solid_face[a]);
        let data = &mut grid.face_mut(a).data;
        for (n, u) in data.iter_mut().enumerate() {
            if solid[n] {
                continue;
            }
            let x = f.position(&origin, dx, f.coords(n));
            let d = x - p.position;
            let dist = d.norm();
            if dist > 0.0 && dist <= p.radius {
                *u += magnitude * d[a] / dist;
            }
        }
        grid.solid_face[a] = solid;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Shape, Solid};

    #[test]
    fn radius_inverts_volume() {
        assert!((sphere_radius(4.0 * PI / 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn no_jitter_keeps_position() {
        let mut s = Spray::new(1);
        let e = LedgerEntry {
            volume: 1e-6,
            momentum: Vec3::new(1e-6, 0.0, 0.0),
            position: Vec3::new(0.1, 0.2, 0.3),
            normal: None,
        };
        s.spawn(std::slice::from_ref(&e), 0.0, 0.1);
        assert_eq!(s.particles[0].position, e.position);
        assert_eq!(s.particles[0].velocity, Vec3::x());
    }

    #[test]
    fn bad_entries_are_skipped() {
        let mut s = Spray::new(1);
        let e = LedgerEntry {
            volume: 0.0,
            momentum: Vec3::zeros(),
            position: Vec3::zeros(),
            normal: None,
        };
        assert_eq!(s.spawn(&[e], 0.5, 0.1), 0.0);
        assert!(s.particles.is_empty());
    }

    #[test]
    fn boundary_entries_start_outside_the_face() {
        let mut s = Spray::new(9);
        let e = LedgerEntry {
            volume: 1e-9,
            momentum: Vec3::zeros(),
            position: Vec3::zeros(),
            normal: Some(Vec3::y()),
        };
        for _ in 0..100 {
            s.spawn(std::slice::from_ref(&e), 0.5, 0.2);
        }
        assert!(s.particles.iter().all(|p| p.position.y >= 0.0));
    }

    #[test]
    fn straight_line_without_forces() {
        let mut ps = vec![SprayParticle {
            position: Vec3::zeros(),
            velocity: Vec3::new(1.0, 2.0, 3.0),
            radius: 0.01,
            id: 0,
        }];
        for _ in 0..10 {
            advect_particles(&mut ps, &Vec3::zeros(), &SolidField::default(), 0.0, 0.1, None);
        }
        assert!((ps[0].position - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-14);
    }

    #[test]
    fn resting_on_floor_is_a_fixed_point() {
        let floor = SolidField::new(vec![Solid::fixed(Shape::HalfSpace {
            point: Vec3::zeros(),
            normal: Vec3::y(),
        })]);
        let r = 0.01;
        let mut ps = vec![SprayParticle {
            position: Vec3::new(0.0, r, 0.0),
            velocity: Vec3::zeros(),
            radius: r,
            id: 0,
        }];
        for _ in 0..20 {
            advect_particles(&mut ps, &Vec3::new(0.0, -9.8, 0.0), &floor, 0.0, 0.01, None);
        }
        assert!((ps[0].position.y - r).abs() < 1e-12);
        assert_eq!(ps[0].velocity.y, 0.0);
    }

    #[test]
    fn walls_contain_particles() {
        let b = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let mut ps = vec![SprayParticle {
            position: Vec3::new(0.5, 0.5, 0.5),
            velocity: Vec3::new(-100.0, 0.0, 0.0),
            radius: 0.05,
            id: 0,
        }];
        move_particles(&mut ps, &SolidField::default(), 0.0, 0.1, Some(&b));
        assert_eq!(ps[0].position.x, 0.05);
        assert_eq!(ps[0].velocity.x, 0.0);
    }

    #[test]
    fn particle_in_air_stays_put() {
        let mut g = MacGrid::new(Vec3::zeros(), 0.1, [10, 10, 10]);
        g.add_water(|p| p.y - 0.3);
        let mut ps = vec![SprayParticle {
            position: Vec3::new(0.5, 0.7, 0.5),
            velocity: Vec3::new(0.0, -1.0, 0.0),
            radius: 0.02,
            id: 0,
        }];
        let before = g.clone();
        let d = reincorporate_to_grid(&mut ps, &mut g, 0.0);
        assert_eq!(d.count, 0);
        assert_eq!(ps.len(), 1);
        assert_eq!(g, before);
    }

    #[test]
    fn particle_entering_still_water() {
        let mut g = MacGrid::new(Vec3::zeros(), 0.1, [10, 10, 10]);
        g.add_water(|p| p.y - 0.5);
        let p = SprayParticle {
            position: Vec3::new(0.43, 0.41, 0.57),
            velocity: Vec3::new(0.5, -2.0, 0.25),
            radius: 0.03,
            id: 0,
        };
        let m0 = g.face_momentum();
        let mut ps = vec![p];
        let d = reincorporate_to_grid(&mut ps, &mut g, 0.0);
        assert_eq!(d.count, 1);
        assert!(ps.is_empty());
        let dm = g.face_momentum() - m0;
        assert!((dm - p.velocity * p.volume()).norm() < 1e-8 * p.volume());
        assert!(g.sample_phi_water(&p.position) <= -0.5 * p.radius);
    }
}
