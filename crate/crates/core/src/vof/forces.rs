use rayon::prelude::*;

use super::{WaterState, EPS_W};
use crate::bake::FrameBake;
use crate::Vec3;

/// Drag along the hair direction relative to drag across it.
pub const PARALLEL_DRAG: f64 = 0.2;

/// `momentum += water · g · dt` on every wet tet.
pub fn apply_external_forces(state: &mut WaterState, gravity: &Vec3, dt: f64) {
    state.momentum.par_iter_mut().zip(&state.water).for_each(|(m, &w)| {
        if w > EPS_W {
            *m += gravity * (w * dt);
        }
    });
}

/// Linear-falloff adhesion toward the painted direction:
/// `momentum += water · α · (φ_a − φ)/φ_a · d · dt` for `φ < φ_a`, with φ
/// the solid distance at the tet centroid. Centroids inside the solid
/// (φ < 0) get the full-strength impulse.
pub fn apply_adhesion(state: &mut WaterState, f: &FrameBake, dt: f64, phi_a: f64) {
    if !(phi_a > 0.0) {
        return;
    }
    state
        .momentum
        .par_iter_mut()
        .enumerate()
        .zip(&state.water)
        .for_each(|((t, m), &w)| {
            let alpha = f.adhesion_alpha[t];
            if w <= EPS_W || alpha == 0.0 || !f.is_fluid(t) {
                return;
            }
            let phi = f.surf_phi[t].max(0.0);
            if phi >= phi_a {
                return;
            }
            *m += f.adhesion_dir[t] * (w * alpha * ((phi_a - phi) / phi_a) * dt);
        });
}

/// Anisotropic drag of the velocity relative to the solid: the component
/// across the hair decays by `f = min(1, dt·k·hair_frac)`, the component
/// along it by `PARALLEL_DRAG · f`.
pub fn apply_porosity_drag(state: &mut WaterState, f: &FrameBake, dt: f64, k_drag: f64) {
    if !(k_drag > 0.0) {
        return;
    }
    state
        .momentum
        .par_iter_mut()
        .enumerate()
        .zip(&state.water)
        .for_each(|((t, m), &w)| {
            let hf = f.hair_frac[t];
            if hf <= 0.0 || w <= EPS_W {
                return;
            }
            let factor = (dt * k_drag * hf).min(1.0);
            let d = f.hair_dir[t];
            let base = f.surf_velocity[t];
            let rel = *m / w - base;
            let par = d * rel.dot(&d);
            let orth = rel - par;
            let rel = orth * (1.0 - factor) + par * (1.0 - PARALLEL_DRAG * factor);
            *m = (base + rel) * w;
        });
}
