use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::Vec3;

/// φ reported by a field with no solids in it.
pub const EMPTY_PHI: f64 = 1e30;

/// Analytic solid primitive in its rest pose. φ < 0 inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Box {
        center: Vec3,
        half_extents: Vec3,
    },
    /// Solid on the side opposite `normal`.
    HalfSpace {
        point: Vec3,
        normal: Vec3,
    },
    /// Hollow sphere: solid between the two radii.
    Shell {
        center: Vec3,
        inner_radius: f64,
        outer_radius: f64,
    },
}

impl Shape {
    /// Signed distance and outward unit normal at `p` (rest frame).
    pub fn eval(&self, p: &Vec3) -> (f64, Vec3) {
        match self {
            Shape::Sphere { center, radius } => {
                let d = p - center;
                let r = d.norm();
                (r - radius, unit_or_x(d, r))
            }
            Shape::Box { center, half_extents } => {
                let d = p - center;
                let q = d.abs() - half_extents;
                let outside = q.sup(&Vec3::zeros());
                let out_len = outside.norm();
                if out_len > 0.0 {
                    let g = Vec3::new(outside.x * sign(d.x), outside.y * sign(d.y), outside.z * sign(d.z));
                    (out_len, g / out_len)
                } else {
                    let a = if q.x >= q.y && q.x >= q.z {
                        0
                    } else if q.y >= q.z {
                        1
                    } else {
                        2
                    };
                    let mut n = Vec3::zeros();
                    n[a] = sign(d[a]);
                    (q[a], n)
                }
            }
            Shape::HalfSpace { point, normal } => {
                let n = normal.normalize();
                ((p - point).dot(&n), n)
            }
            Shape::Shell {
                center,
                inner_radius,
                outer_radius,
            } => {
                let d = p - center;
                let r = d.norm();
                let n = unit_or_x(d, r);
                let outer = r - outer_radius;
                let inner = inner_radius - r;
                if outer >= inner {
                    (outer, n)
                } else {
                    (inner, -n)
                }
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn unit_or_x(d: Vec3, len: f64) -> Vec3 {
    if len > 1e-300 {
        d / len
    } else {
        Vec3::x()
    }
}

/// Constant-rate rigid motion: translation at `velocity` plus rotation at
/// `angular_velocity` (axis times rad/s) about `pivot`, which travels with
/// the body.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigidMotion {
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    pub pivot: Vec3,
}

impl RigidMotion {
    pub fn is_static(&self) -> bool {
        self.velocity == Vec3::zeros() && self.angular_velocity == Vec3::zeros()
    }

    fn rotation(&self, t: f64) -> Rotation3<f64> {
        Rotation3::new(self.angular_velocity * t)
    }

    /// Maps a rest-pose point to its world position at time `t`.
    pub fn apply(&self, rest: &Vec3, t: f64) -> Vec3 {
        if self.is_static() {
            return *rest;
        }
        self.pivot + self.velocity * t + self.rotation(t) * (rest - self.pivot)
    }

    /// Inverse of [`RigidMotion::apply`].
    pub fn to_rest(&self, p: &Vec3, t: f64) -> Vec3 {
        if self.is_static() {
            return *p;
        }
        self.pivot + self.rotation(t).inverse() * (p - self.pivot - self.velocity * t)
    }

    /// Material velocity of the body at world point `p`, time `t`.
    pub fn velocity_at(&self, p: &Vec3, t: f64) -> Vec3 {
        self.velocity + self.angular_velocity.cross(&(p - self.pivot - self.velocity * t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solid {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "RigidMotion::is_static")]
    pub motion: RigidMotion,
}

impl Solid {
    pub fn fixed(shape: Shape) -> Self {
        Self {
            shape,
            motion: RigidMotion::default(),
        }
    }

    pub fn eval(&self, p: &Vec3, t: f64) -> (f64, Vec3) {
        if self.motion.is_static() {
            return self.shape.eval(p);
        }
        let rest = self.motion.to_rest(p, t);
        let (phi, n) = self.shape.eval(&rest);
        (phi, self.motion.rotation(t) * n)
    }
}

/// Static signed-distance samples on a regular grid (cell-centered at
/// `origin + (i + ½)·dx`), trilinearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSdf {
    pub origin: Vec3,
    pub dx: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl SampledSdf {
    pub fn from_fn(origin: Vec3, dx: f64, dims: [usize; 3], f: impl Fn(&Vec3) -> f64) -> Self {
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * dx;
                    values.push(f(&p));
                }
            }
        }
        Self {
            origin,
            dx,
            dims,
            values,
        }
    }

    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    /// Trilinear value and the exact gradient of the trilinear interpolant.
    /// Points outside the sample range are clamped and the clamp distance
    /// added, which keeps φ Lipschitz.
    pub fn eval(&self, p: &Vec3) -> (f64, Vec3) {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        let mut clamp = Vec3::zeros();
        for a in 0..3 {
            let x = (p[a] - self.origin[a]) / self.dx - 0.5;
            let hi = (self.dims[a] - 1) as f64;
            let xc = x.clamp(0.0, hi);
            clamp[a] = (x - xc) * self.dx;
            if self.dims[a] == 1 {
                base[a] = 0;
                frac[a] = 0.0;
            } else {
                let b = (xc.floor() as usize).min(self.dims[a] - 2);
                base[a] = b;
                frac[a] = xc - b as f64;
            }
        }
        let step = |a: usize| if self.dims[a] > 1 { 1 } else { 0 };
        let (di, dj, dk) = (step(0), step(1), step(2));
        let (i, j, k) = (base[0], base[1], base[2]);
        let c = [
            self.at(i, j, k),
            self.at(i + di, j, k),
            self.at(i, j + dj, k),
            self.at(i + di, j + dj, k),
            self.at(i, j, k + dk),
            self.at(i + di, j, k + dk),
            self.at(i, j + dj, k + dk),
            self.at(i + di, j + dj, k + dk),
        ];
        let [fx, fy, fz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let x00 = lerp(c[0], c[1], fx);
        let x10 = lerp(c[2], c[3], fx);
        let x01 = lerp(c[4], c[5], fx);
        let x11 = lerp(c[6], c[7], fx);
        let y0 = lerp(x00, x10, fy);
        let y1 = lerp(x01, x11, fy);
        let phi = lerp(y0, y1, fz);
        let gx = lerp(
            lerp(c[1] - c[0], c[3] - c[2], fy),
            lerp(c[5] - c[4], c[7] - c[6], fy),
            fz,
        );
        let gy = lerp(x10 - x00, x11 - x01, fz);
        let gz = y1 - y0;
        let mut g = Vec3::new(gx, gy, gz) / self.dx;
        let cl = clamp.norm();
        if cl > 0.0 {
            g = clamp / cl;
        }
        let n = g.norm();
        (phi + cl, if n > 1e-300 { g / n } else { Vec3::x() })
    }
}

/// Union (min φ) of analytic solids and an optional static sampled field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolidField {
    pub solids: Vec<Solid>,
    pub sampled: Option<SampledSdf>,
}

impl SolidField {
    pub fn new(solids: Vec<Solid>) -> Self {
        Self { solids, sampled: None }
    }

    pub fn is_empty(&self) -> bool {
        self.solids.is_empty() && self.sampled.is_none()
    }

    pub fn is_static(&self) -> bool {
        self.solids.iter().all(|s| s.motion.is_static())
    }

    /// Index of the closest analytic solid (`solids.len()` for the sampled
    /// field) with its φ and normal.
    fn closest(&self, p: &Vec3, t: f64) -> Option<(usize, f64, Vec3)> {
        let mut best: Option<(usize, f64, Vec3)> = None;
        for (i, s) in self.solids.iter().enumerate() {
            let (phi, n) = s.eval(p, t);
            if best.is_none_or(|b| phi < b.1) {
                best = Some((i, phi, n));
            }
        }
        if let Some(sdf) = &self.sampled {
            let (phi, n) = sdf.eval(p);
            if best.is_none_or(|b| phi < b.1) {
                best = Some((self.solids.len(), phi, n));
            }
        }
        best
    }

    pub fn phi(&self, p: &Vec3, t: f64) -> f64 {
        self.query(p, t).0
    }

    /// Signed distance and unit outward normal. Empty fields report
    /// [`EMPTY_PHI`] and +y.
    pub fn query(&self, p: &Vec3, t: f64) -> (f64, Vec3) {
        match self.closest(p, t) {
            Some((_, phi, n)) => (phi, n),
            None => (EMPTY_PHI, Vec3::y()),
        }
    }

    /// Material velocity of the closest solid at `p`.
    pub fn velocity(&self, p: &Vec3, t: f64) -> Vec3 {
        match self.closest(p, t) {
            Some((i, _, _)) if i < self.solids.len() => self.solids[i].motion.velocity_at(p, t),
            _ => Vec3::zeros(),
        }
    }

    /// Maps `p` into the rest frame of the closest solid.
    pub fn to_rest(&self, p: &Vec3, t: f64) -> Vec3 {
        match self.closest(p, t) {
            Some((i, _, _)) if i < self.solids.len() => self.solids[i].motion.to_rest(p, t),
            _ => *p,
        }
    }

    /// Motion of the closest analytic solid, if any.
    pub fn closest_motion(&self, p: &Vec3, t: f64) -> Option<&RigidMotion> {
        match self.closest(p, t) {
            Some((i, _, _)) if i < self.solids.len() => Some(&self.solids[i].motion),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_normal(f: &SolidField, p: &Vec3) -> Vec3 {
        let h = 1e-6;
        let g = Vec3::new(
            f.phi(&(p + Vec3::x() * h), 0.0) - f.phi(&(p - Vec3::x() * h), 0.0),
            f.phi(&(p + Vec3::y() * h), 0.0) - f.phi(&(p - Vec3::y() * h), 0.0),
            f.phi(&(p + Vec3::z() * h), 0.0) - f.phi(&(p - Vec3::z() * h), 0.0),
        ) / (2.0 * h);
        g.normalize()
    }

    #[test]
    fn unit_sphere_values() {
        let f = SolidField::new(vec![Solid::fixed(Shape::Sphere {
            center: Vec3::zeros(),
            radius: 1.0,
        })]);
        let (phi, n) = f.query(&Vec3::new(2.0, 0.0, 0.0), 0.0);
        assert_eq!(phi, 1.0);
        assert!((n - Vec3::x()).norm() < 1e-15);
        let (phi, n) = f.query(&Vec3::zeros(), 0.0);
        assert_eq!(phi, -1.0);
        assert!((n.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normals_match_finite_differences_away_from_medial_axis() {
        let f = SolidField::new(vec![
            Solid::fixed(Shape::Sphere {
                center: Vec3::new(0.2, 0.1, 0.0),
                radius: 0.4,
            }),
            Solid::fixed(Shape::Box {
                center: Vec3::new(-0.5, 0.0, 0.3),
                half_extents: Vec3::new(0.2, 0.3, 0.25),
            }),
            Solid::fixed(Shape::HalfSpace {
                point: Vec3::new(0.0, -0.8, 0.0),
                normal: Vec3::new(0.1, 1.0, 0.0),
            }),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 1000 {
            let p = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            // Stay away from the medial axis: the two closest surfaces (and
            // the box's own interior ridges) must be well separated.
            let mut phis: Vec<f64> = f.solids.iter().map(|s| s.eval(&p, 0.0).0).collect();
            phis.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if phis[1] - phis[0] < 1e-3 {
                continue;
            }
            if let Shape::Box { center, half_extents } = &f.solids[1].shape {
                let q = (p - center).abs() - half_extents;
                let mut qs = [q.x, q.y, q.z];
                qs.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if qs[0] < 0.0 && qs[0] - qs[1] < 1e-3 {
                    continue;
                }
                if (p - center).iter().any(|c| c.abs() < 1e-3) {
                    continue;
                }
            }
            if (p - Vec3::new(0.2, 0.1, 0.0)).norm() < 1e-3 {
                continue;
            }
            let (_, n) = f.query(&p, 0.0);
            assert!((n - fd_normal(&f, &p)).norm() <= 1e-4, "{p:?}");
            checked += 1;
        }
    }

    #[test]
    fn moving_sphere_follows_its_motion() {
        let s = Solid {
            shape: Shape::Sphere {
                center: Vec3::zeros(),
                radius: 0.5,
            },
            motion: RigidMotion {
                velocity: Vec3::new(1.0, 0.0, 0.0),
                angular_velocity: Vec3::new(0.0, 0.0, 2.0),
                pivot: Vec3::zeros(),
            },
        };
        let (phi, _) = s.eval(&Vec3::new(2.0, 0.0, 0.0), 2.0);
        assert!(phi.abs() < 1e-12 + 0.5 && (phi + 0.5).abs() < 1e-12);
        let p = Vec3::new(0.3, -0.2, 0.4);
        let back = s.motion.apply(&s.motion.to_rest(&p, 0.7), 0.7);
        assert!((back - p).norm() < 1e-12);
        let v = s.motion.velocity_at(&Vec3::new(1.0, 1.0, 0.0), 0.0);
        assert!((v - Vec3::new(-1.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn shell_has_hollow_interior() {
        let s = Shape::Shell {
            center: Vec3::zeros(),
            inner_radius: 0.5,
            outer_radius: 1.0,
        };
        assert!((s.eval(&Vec3::zeros()).0 - 0.5).abs() < 1e-15);
        assert!((s.eval(&Vec3::new(0.75, 0.0, 0.0)).0 + 0.25).abs() < 1e-15);
        assert!((s.eval(&Vec3::new(0.0, 2.0, 0.0)).0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_field_reproduces_linear_function() {
        let sdf = SampledSdf::from_fn(Vec3::zeros(), 0.1, [8, 8, 8], |p| p.x - 0.37);
        let (phi, n) = sdf.eval(&Vec3::new(0.41, 0.33, 0.5));
        assert!((phi - 0.04).abs() < 1e-12);
        assert!((n - Vec3::x()).norm() < 1e-9);
    }
}
