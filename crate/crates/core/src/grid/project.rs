use rayon::prelude::*;

use super::MacGrid;
use crate::{Error, Result};

const MIC_TAU: f64 = 0.97;
const MIC_SIGMA: f64 = 0.25;
/// Ghost-fluid interface fraction floor.
const THETA_MIN: f64 = 0.01;
/// Layers of velocity extrapolation into the air after projection.
const EXTRAPOLATION_LAYERS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProjectStats {
    pub iterations: usize,
    /// Final max-norm residual relative to the max-norm right-hand side.
    pub residual: f64,
}

/// The pressure Poisson system over water cells, stored on the full cell
/// lattice. Non-water rows are identically zero.
#[derive(Clone, Debug)]
pub struct PressureSystem {
    pub dims: [usize; 3],
    pub fluid: Vec<bool>,
    pub diag: Vec<f64>,
    /// Coupling to the +x/+y/+z neighbor (−1 between two water cells).
    pub plus: [Vec<f64>; 3],
    pub rhs: Vec<f64>,
}

fn face_index(dims: [usize; 3], axis: usize, i: usize, j: usize, k: usize) -> usize {
    let mut fd = dims;
    fd[axis] += 1;
    i + fd[0] * (j + fd[1] * k)
}

fn step(ijk: [usize; 3], axis: usize, up: bool) -> [usize; 3] {
    let mut o = ijk;
    if up {
        o[axis] += 1;
    } else {
        o[axis] -= 1;
    }
    o
}

impl PressureSystem {
    pub fn build(g: &MacGrid, dt: f64) -> Self {
        let dims = g.dims;
        let n = g.n_cells();
        let cell = |c: [usize; 3]| c[0] + dims[0] * (c[1] + dims[1] * c[2]);
        let phi = &g.phi_water.data;
        let mut fluid = vec![false; n];
        for (c, f) in fluid.iter_mut().enumerate() {
            if phi[c] < 0.0 {
                let ijk = g.phi_water.coords(c);
                *f = (0..3).any(|a| {
                    let hi = step(ijk, a, true);
                    !g.solid_face[a][face_index(dims, a, ijk[0], ijk[1], ijk[2])]
                        || !g.solid_face[a][face_index(dims, a, hi[0], hi[1], hi[2])]
                });
            }
        }
        let mut diag = vec![0.0; n];
        let mut plus = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut rhs = vec![0.0; n];
        let scale = g.dx / dt;
        for c in 0..n {
            if !fluid[c] {
                continue;
            }
            let ijk = g.phi_water.coords(c);
            let mut out = 0.0;
            for a in 0..3 {
                for up in [false, true] {
                    let fijk = if up { step(ijk, a, true) } else { ijk };
                    let fi = face_index(dims, a, fijk[0], fijk[1], fijk[2]);
                    let u = g.face(a).data[fi];
                    out += if up { u } else { -u };
                    if g.solid_face[a][fi] {
                        continue;
                    }
                    let nb = cell(step(ijk, a, up));
                    if fluid[nb] {
                        diag[c] += 1.0;
                        if up {
                            plus[a][c] = -1.0;
                        }
                    } else {
                        let theta = (phi[c] / (phi[c] - phi[nb])).max(THETA_MIN);
                        diag[c] += 1.0 / theta;
                    }
                }
            }
            rhs[c] = -scale * out;
        }
        Self {
            dims,
            fluid,
            diag,
            plus,
            rhs,
        }
    }

    fn offset(&self, a: usize) -> usize {
        match a {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let off = [self.offset(0), self.offset(1), self.offset(2)];
        let dims = self.dims;
        y.par_iter_mut().enumerate().for_each(|(c, yc)| {
            if !self.fluid[c] {
                *yc = 0.0;
                return;
            }
            let i = c % dims[0];
            let j = (c / dims[0]) % dims[1];
            let k = c / (dims[0] * dims[1]);
            let ijk = [i, j, k];
            let mut s = self.diag[c] * x[c];
            for a in 0..3 {
                s += self.plus[a][c] * x.get(c + off[a]).copied().unwrap_or(0.0);
                if ijk[a] > 0 {
                    s += self.plus[a][c - off[a]] * x[c - off[a]];
                }
            }
            *yc = s;
        });
    }

    fn mic0(&self) -> Vec<f64> {
        let n = self.fluid.len();
        let off = [self.offset(0), self.offset(1), self.offset(2)];
        let dims = self.dims;
        let mut pre = vec![0.0; n];
        for c in 0..n {
            if !self.fluid[c] {
                continue;
            }
            let ijk = [c % dims[0], (c / dims[0]) % dims[1], c / (dims[0] * dims[1])];
            let mut e = self.diag[c];
            for a in 0..3 {
                if ijk[a] == 0 {
                    continue;
                }
                let m = c - off[a];
                if !self.fluid[m] {
                    continue;
                }
                let am = self.plus[a][m] * pre[m];
                e -= am * am;
                let others: f64 = (0..3).filter(|&b| b != a).map(|b| self.plus[b][m]).sum();
                e -= MIC_TAU * self.plus[a][m] * others * pre[m] * pre[m];
            }
            if e < MIC_SIGMA * self.diag[c] {
                e = self.diag[c];
            }
            pre[c] = 1.0 / e.sqrt();
        }
        pre
    }

    fn precondition(&self, pre: &[f64], r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let off = [self.offset(0), self.offset(1), self.offset(2)];
        let dims = self.dims;
        let mut q = vec![0.0; n];
        for c in 0..n {
            if !self.fluid[c] {
                continue;
            }
            let ijk = [c % dims[0], (c / dims[0]) % dims[1], c / (dims[0] * dims[1])];
            let mut t = r[c];
            for a in 0..3 {
                if ijk[a] > 0 {
                    let m = c - off[a];
                    t -= self.plus[a][m] * pre[m] * q[m];
                }
            }
            q[c] = t * pre[c];
        }
        for c in (0..n).rev() {
            if !self.fluid[c] {
                z[c] = 0.0;
                continue;
            }
            let mut t = q[c];
            for a in 0..3 {
                let p = c + off[a];
                if p < n {
                    t -= self.plus[a][c] * pre[c] * z[p];
                }
            }
            z[c] = t * pre[c];
        }
    }

    /// MIC(0)-preconditioned conjugate gradient. Stops when the max-norm
    /// residual is at most `tol` times the max-norm right-hand side.
    pub fn solve(&self, p: &mut [f64], tol: f64, max_iter: usize) -> Result<ProjectStats> {
        let n = self.rhs.len();
        p.iter_mut().for_each(|x| *x = 0.0);
        let bnorm = max_abs(&self.rhs);
        if bnorm == 0.0 {
            return Ok(ProjectStats::default());
        }
        let mut r = self.rhs.clone();
        let pre = self.mic0();
        let mut z = vec![0.0; n];
        self.precondition(&pre, &r, &mut z);
        let mut s = z.clone();
        let mut sigma = dot(&z, &r);
        let mut as_ = vec![0.0; n];
        for it in 1..=max_iter {
            self.apply(&s, &mut as_);
            let denom = dot(&s, &as_);
            if denom == 0.0 {
                break;
            }
            let alpha = sigma / denom;
            p.par_iter_mut().zip(&s).for_each(|(x, si)| *x += alpha * si);
            r.par_iter_mut().zip(&as_).for_each(|(x, ai)| *x -= alpha * ai);
            let res = max_abs(&r) / bnorm;
            if res <= tol {
                return Ok(ProjectStats {
                    iterations: it,
                    residual: res,
                });
            }
            self.precondition(&pre, &r, &mut z);
            let sigma_new = dot(&z, &r);
            let beta = sigma_new / sigma;
            s.par_iter_mut().zip(&z).for_each(|(x, zi)| *x = zi + beta * *x);
            sigma = sigma_new;
        }
        Err(Error::SolverDiverged {
            iterations: max_iter,
            residual: max_abs(&r) / bnorm,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::det_sum(a.par_iter().zip(b).map(|(x, y)| x * y))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `A x` for the system of the current grid state (used by symmetry checks).
pub fn pressure_matrix_apply(sys: &PressureSystem, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    sys.apply(x, &mut y);
    y
}

/// Cell divergence `Σ u_out / dx` on water cells, zero elsewhere.
pub fn discrete_divergence(g: &MacGrid) -> Vec<f64> {
    let dims = g.dims;
    (0..g.n_cells())
        .map(|c| {
            if g.phi_water.data[c] >= 0.0 {
                return 0.0;
            }
            let ijk = g.phi_water.coords(c);
            let mut s = 0.0;
            for a in 0..3 {
                let hi = step(ijk, a, true);
                s += g.face(a).data[face_index(dims, a, hi[0], hi[1], hi[2])]
                    - g.face(a).data[face_index(dims, a, ijk[0], ijk[1], ijk[2])];
            }
            s / g.dx
        })
        .collect()
}

impl MacGrid {
    /// Makes the velocity divergence-free on water cells, then extrapolates
    /// it into nearby air.
    pub fn project(&mut self, dt: f64, tol: f64, max_iter: usize) -> Result<ProjectStats> {
        self.enforce_solid_faces();
        let sys = PressureSystem::build(self, dt);
        let mut p = vec![0.0; self.n_cells()];
        let stats = sys.solve(&mut p, tol, max_iter)?;
        let dims = self.dims;
        let k = dt / self.dx;
        let phi = self.phi_water.data.clone();
        for a in 0..3 {
            let solid = std::mem::take(&mut self.solid_face[a]);
            let f = self.face(a).clone();
            let mut valid = vec![false; f.data.len()];
            let data = &mut self.face_mut(a).data;
            for (fi, u) in data.iter_mut().enumerate() {
                if solid[fi] {
                    continue;
                }
                let ijk = f.coords(fi);
                let lo = step(ijk, a, false);
                let l = lo[0] + dims[0] * (lo[1] + dims[1] * lo[2]);
                let r = ijk[0] + dims[0] * (ijk[1] + dims[1] * ijk[2]);
                let (fl, fr) = (sys.fluid[l], sys.fluid[r]);
                if !fl && !fr {
                    continue;
                }
                let ghost = |fluid: usize, air: usize| {
                    let theta = (phi[fluid] / (phi[fluid] - phi[air])).max(THETA_MIN);
                    p[fluid] * (1.0 - 1.0 / theta)
                };
                let pl = if fl { p[l] } else { ghost(r, l) };
                let pr = if fr { p[r] } else { ghost(l, r) };
                *u -= k * (pr - pl);
                valid[fi] = true;
            }
            extrapolate(data, &f.dims, &mut valid, &solid);
            self.solid_face[a] = solid;
        }
        for (c, &pc) in p.iter().enumerate() {
            self.pressure.data[c] = pc;
        }
        Ok(stats)
    }
}

/// Fills invalid, non-solid samples by averaging valid 6-neighbors, one
/// layer at a time; whatever is still invalid afterwards is zeroed.
fn extrapolate(data: &mut [f64], dims: &[usize; 3], valid: &mut [bool], solid: &[bool]) {
    let idx = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
    for _ in 0..EXTRAPOLATION_LAYERS {
        let mut updates = Vec::new();
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let c = idx(i, j, k);
                    if valid[c] || solid[c] {
                        continue;
                    }
                    let mut sum = 0.0;
                    let mut cnt = 0;
                    let mut visit = |m: usize| {
                        if valid[m] {
                            sum += data[m];
                            cnt += 1;
                        }
                    };
                    if i > 0 {
                        visit(idx(i - 1, j, k));
                    }
                    if i + 1 < dims[0] {
                        visit(idx(i + 1, j, k));
                    }
                    if j > 0 {
                        visit(idx(i, j - 1, k));
                    }
                    if j + 1 < dims[1] {
                        visit(idx(i, j + 1, k));
                    }
                    if k > 0 {
                        visit(idx(i, j, k - 1));
                    }
                    if k + 1 < dims[2] {
                        visit(idx(i, j, k + 1));
                    }
                    if cnt > 0 {
                        updates.push((c, sum / cnt as f64));
                    }
                }
            }
        }
        if updates.is_empty() {
            break;
        }
        for (c, v) in updates {
            data[c] = v;
            valid[c] = true;
        }
    }
    for c in 0..data.len() {
        if !valid[c] && !solid[c] {
            data[c] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dam(n: usize) -> MacGrid {
        let mut g = MacGrid::new(Vec3::zeros(), 1.0 / n as f64, [n, n, n]);
        g.add_water(|p| (p.x - 0.4).max(p.y - 0.6));
        g
    }

    #[test]
    fn matrix_is_symmetric() {
        let g = dam(12);
        let sys = PressureSystem::build(&g, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = g.n_cells();
        let x: Vec<f64> = (0..n)
            .map(|c| if sys.fluid[c] { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|c| if sys.fluid[c] { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let ax = pressure_matrix_apply(&sys, &x);
        let ay = pressure_matrix_apply(&sys, &y);
        let l = dot(&ax, &y);
        let r = dot(&x, &ay);
        assert!((l - r).abs() <= 1e-10 * l.abs().max(1.0));
    }

    #[test]
    fn still_water_stays_still() {
        let mut g = dam(10);
        let stats = g.project(0.01, 1e-10, 500).unwrap();
        assert_eq!(stats.iterations, 0);
        assert_eq!(g.max_speed(), 0.0);
    }

    #[test]
    fn dam_break_is_divergence_free() {
        let mut g = dam(16);
        g.apply_gravity(&Vec3::new(0.0, -9.8, 0.0), 0.02);
        g.project(0.02, 1e-10, 1000).unwrap();
        let div = discrete_divergence(&g);
        let bound = 1e-6 * g.max_speed() / g.dx;
        assert!(div.iter().all(|d| d.abs() <= bound));
        assert!(g.max_speed() > 0.0);
    }
}
