use rayon::prelude::*;

use super::{Field3, MacGrid};
use crate::Vec3;

impl MacGrid {
    /// RK2 backtrace through the current velocity field.
    fn backtrace(&self, p: &Vec3, dt: f64) -> Vec3 {
        let v1 = self.sample_velocity(p);
        let mid = p - v1 * (0.5 * dt);
        let v2 = self.sample_velocity(&mid);
        p - v2 * dt
    }

    fn advected(&self, f: &Field3, dt: f64) -> Vec<f64> {
        (0..f.data.len())
            .into_par_iter()
            .map(|n| {
                let p = f.position(&self.origin, self.dx, f.coords(n));
                f.sample(&self.origin, self.dx, &self.backtrace(&p, dt))
            })
            .collect()
    }

    /// Semi-Lagrangian advection of the three velocity components and the
    /// water level set by the velocity at the start of the step.
    pub fn advect(&mut self, dt: f64) {
        let u = self.advected(&self.u, dt);
        let v = self.advected(&self.v, dt);
        let w = self.advected(&self.w, dt);
        let phi = self.advected(&self.phi_water, dt);
        self.u.data = u;
        self.v.data = v;
        self.w.data = w;
        self.phi_water.data = phi;
        self.advect_markers(dt);
        self.enforce_solid_faces();
    }

    fn advect_markers(&mut self, dt: f64) {
        if self.markers.is_empty() {
            return;
        }
        let lo = self.origin;
        let hi = self.upper();
        let mut markers = std::mem::take(&mut self.markers);
        markers.par_iter_mut().for_each(|m| {
            let v1 = self.sample_velocity(&m.position);
            let mid = m.position + v1 * (0.5 * dt);
            let v2 = self.sample_velocity(&mid);
            let p = m.position + v2 * dt;
            m.position = Vec3::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y), p.z.clamp(lo.z, hi.z));
        });
        self.markers = markers;
    }
}
