use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Field3, MacGrid};
use crate::Vec3;

/// Water-side marker used to repair the level set after advection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marker {
    pub position: Vec3,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarkerConfig {
    pub enabled: bool,
    pub per_cell: usize,
    /// Seeding band below the surface, in cells.
    pub band: f64,
}

impl Default for MarkerConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            per_cell: 8,
            band: 3.0,
        }
    }
}

/// Rebuilds `phi` as a signed distance keeping its zero crossing.
///
/// Cells next to a sign change get `φ/|∇φ|`; the rest are filled by fast
/// sweeping of the eikonal equation.
pub fn reinitialize(phi: &mut Field3, dx: f64) {
    let [nx, ny, nz] = phi.dims;
    let n = phi.data.len();
    let old = phi.data.clone();
    let far = f64::MAX / 4.0;
    let mut d = vec![far; n];
    let mut fixed = vec![false; n];
    let at = |i: isize, j: isize, k: isize| -> Option<usize> {
        if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
            None
        } else {
            Some(i as usize + nx * (j as usize + ny * k as usize))
        }
    };
    const NB: [[isize; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    for k in 0..nz as isize {
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let c = at(i, j, k).unwrap();
                let pc = old[c];
                let crosses = NB
                    .iter()
                    .any(|o| at(i + o[0], j + o[1], k + o[2]).is_some_and(|m| (old[m] < 0.0) != (pc < 0.0)));
                if !crosses {
                    continue;
                }
                let mut g2 = 0.0;
                for a in 0..3 {
                    let mut e = [0isize; 3];
                    e[a] = 1;
                    let p = at(i + e[0], j + e[1], k + e[2]);
                    let m = at(i - e[0], j - e[1], k - e[2]);
                    let g = match (p, m) {
                        (Some(p), Some(m)) => (old[p] - old[m]) / (2.0 * dx),
                        (Some(p), None) => (old[p] - pc) / dx,
                        (None, Some(m)) => (pc - old[m]) / dx,
                        (None, None) => 0.0,
                    };
                    g2 += g * g;
                }
                let g = g2.sqrt();
                let est = if g > 1e-6 { pc.abs() / g } else { pc.abs() };
                d[c] = est.min(dx);
                fixed[c] = true;
            }
        }
    }
    if !fixed.iter().any(|&f| f) {
        return;
    }

    let update = |d: &mut [f64], i: usize, j: usize, k: usize| {
        let c = i + nx * (j + ny * k);
        if fixed[c] {
            return;
        }
        let nbmin = |a: Option<usize>, b: Option<usize>| {
            let x = a.map_or(far, |m| d[m]);
            let y = b.map_or(far, |m| d[m]);
            x.min(y)
        };
        let (ii, jj, kk) = (i as isize, j as isize, k as isize);
        let mut v = [
            nbmin(at(ii - 1, jj, kk), at(ii + 1, jj, kk)),
            nbmin(at(ii, jj - 1, kk), at(ii, jj + 1, kk)),
            nbmin(at(ii, jj, kk - 1), at(ii, jj, kk + 1)),
        ];
        v.sort_by(f64::total_cmp);
        let [a, b, c3] = v;
        if a >= far {
            return;
        }
        let mut x = a + dx;
        if x > b {
            x = 0.5 * (a + b + (2.0 * dx * dx - (a - b) * (a - b)).max(0.0).sqrt());
            if x > c3 {
                let s = a + b + c3;
                let q = a * a + b * b + c3 * c3 - dx * dx;
                x = (s + (s * s - 3.0 * q).max(0.0).sqrt()) / 3.0;
            }
        }
        if x < d[c] {
            d[c] = x;
        }
    };

    for _ in 0..2 {
        for dir in 0..8 {
            let fi = dir & 1 != 0;
            let fj = dir & 2 != 0;
            let fk = dir & 4 != 0;
            for kk in 0..nz {
                let k = if fk { nz - 1 - kk } else { kk };
                for jj in 0..ny {
                    let j = if fj { ny - 1 - jj } else { jj };
                    for ii in 0..nx {
                        let i = if fi { nx - 1 - ii } else { ii };
                        update(&mut d, i, j, k);
                    }
                }
            }
        }
    }
    for c in 0..n {
        phi.data[c] = if old[c] < 0.0 { -d[c] } else { d[c] };
    }
}

impl MacGrid {
    /// Seeds markers in water cells within `band` cells of the surface.
    pub fn seed_markers(&mut self, cfg: &MarkerConfig, seed: u64) {
        self.markers.clear();
        if !cfg.enabled {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dx = self.dx;
        let (rmin, rmax) = (0.1 * dx, 0.5 * dx);
        for n in 0..self.n_cells() {
            let phi = self.phi_water.data[n];
            if phi >= 0.0 || phi < -cfg.band * dx {
                continue;
            }
            let c = self.cell_center(self.phi_water.coords(n));
            for _ in 0..cfg.per_cell {
                let p = c + Vec3::new(
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                ) * dx;
                let phi_p = self.sample_phi_water(&p);
                if phi_p < 0.0 {
                    self.markers.push(Marker {
                        position: p,
                        radius: (-phi_p).clamp(rmin, rmax),
                    });
                }
            }
        }
    }

    /// Markers that ended up outside the water by more than their radius
    /// pull the level set back around their spheres. Only cells in the
    /// surface band are touched, so distant air values stay distances.
    pub fn correct_with_markers(&mut self) {
        if self.markers.is_empty() {
            return;
        }
        let dx = self.dx;
        let f = self.phi_water.clone();
        for m in &self.markers {
            if self.sample_phi_water(&m.position) <= m.radius {
                continue;
            }
            let g = (m.position - self.origin) / dx;
            let lo = |a: usize| ((g[a] - 2.5).floor().max(0.0)) as usize;
            let hi = |a: usize| ((g[a] + 2.5).ceil() as usize).min(f.dims[a] - 1);
            for k in lo(2)..=hi(2) {
                for j in lo(1)..=hi(1) {
                    for i in lo(0)..=hi(0) {
                        let p = f.position(&self.origin, dx, [i, j, k]);
                        let s = (p - m.position).norm() - m.radius;
                        let n = f.idx(i, j, k);
                        let cur = self.phi_water.data[n];
                        if s < cur && cur < 0.5 * dx {
                            self.phi_water.data[n] = s;
                        }
                    }
                }
            }
        }
    }

    /// Reinitialization, bracketed by marker corrections when markers exist.
    pub fn update_level_set(&mut self) {
        self.correct_with_markers();
        reinitialize(&mut self.phi_water, self.dx);
        self.correct_with_markers();
        self.resize_markers();
    }

    /// Markers still inside the water take their current depth as radius.
    fn resize_markers(&mut self) {
        let (rmin, rmax) = (0.1 * self.dx, 0.5 * self.dx);
        let mut markers = std::mem::take(&mut self.markers);
        for m in &mut markers {
            let phi = self.sample_phi_water(&m.position);
            if phi < 0.0 {
                m.radius = (-phi).clamp(rmin, rmax);
            }
        }
        self.markers = markers;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_interface_stays_put() {
        let mut g = MacGrid::new(Vec3::zeros(), 0.05, [16, 16, 16]);
        let n = Vec3::new(1.0, 2.0, 0.5).normalize();
        let c = Vec3::new(0.4, 0.4, 0.4);
        // distorted but zero at the same plane
        g.add_water(|p| 3.0 * (p - c).dot(&n));
        reinitialize(&mut g.phi_water, g.dx);
        let f = g.phi_water.clone();
        let mut worst: f64 = 0.0;
        for m in 0..f.data.len() {
            let p = f.position(&g.origin, g.dx, f.coords(m));
            let exact = (p - c).dot(&n);
            if exact.abs() < g.dx {
                worst = worst.max((f.data[m] - exact).abs());
            }
        }
        assert!(worst < 0.1 * g.dx, "{worst}");
    }

    #[test]
    fn exact_distance_is_preserved() {
        let mut g = MacGrid::new(Vec3::zeros(), 0.05, [12, 12, 12]);
        g.add_water(|p| p.y - 0.3);
        let before = g.phi_water.clone();
        reinitialize(&mut g.phi_water, g.dx);
        for (a, b) in before.data.iter().zip(&g.phi_water.data) {
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn sphere_distance_close_to_exact_near_surface() {
        let mut g = MacGrid::new(Vec3::zeros(), 0.05, [20, 20, 20]);
        let c = Vec3::new(0.5, 0.5, 0.5);
        g.add_water(|p| ((p - c).norm_squared() - 0.09) * 2.0);
        reinitialize(&mut g.phi_water, g.dx);
        let f = g.phi_water.clone();
        for m in 0..f.data.len() {
            let p = f.position(&g.origin, g.dx, f.coords(m));
            let exact = (p - c).norm() - 0.3;
            if exact.abs() < 0.5 * g.dx {
                assert!((f.data[m] - exact).abs() < 0.1 * g.dx, "{} {}", f.data[m], exact);
            }
            let [i, j, k] = f.coords(m);
            if exact.abs() < 3.0 * g.dx && (1..19).contains(&i) && (1..19).contains(&j) && (1..19).contains(&k) {
                let d =
                    |a: [usize; 3], b: [usize; 3]| (f.get(a[0], a[1], a[2]) - f.get(b[0], b[1], b[2])) / (2.0 * g.dx);
                let grad = Vec3::new(
                    d([i + 1, j, k], [i - 1, j, k]),
                    d([i, j + 1, k], [i, j - 1, k]),
                    d([i, j, k + 1], [i, j, k - 1]),
                );
                assert!((0.8..=1.2).contains(&grad.norm()), "{}", grad.norm());
            }
        }
    }

    fn translate_sphere(markers: bool) -> f64 {
        let mut g = MacGrid::new(Vec3::zeros(), 1.0 / 32.0, [32, 32, 32]);
        let c = Vec3::new(0.3, 0.5, 0.5);
        g.add_water(|p| (p - c).norm() - 0.12);
        let cfg = MarkerConfig {
            enabled: markers,
            ..Default::default()
        };
        g.seed_markers(&cfg, 11);
        let v0 = g.water_volume();
        for _ in 0..10 {
            for (n, u) in g.u.data.iter_mut().enumerate() {
                if !g.solid_face[0][n] {
                    *u = 1.0;
                }
            }
            g.advect(0.6 / 32.0);
            g.update_level_set();
        }
        (v0 - g.water_volume()) / v0
    }

    #[test]
    fn markers_reduce_volume_loss() {
        let without = translate_sphere(false);
        let with = translate_sphere(true);
        assert!(without > with, "{without} {with}");
    }
}
