use super::{Bake, FrameBake};
use crate::mesh::TetMesh;

const TOL: f64 = 1e-9;

/// Lists every violated frame invariant (empty when the frame is sound).
pub fn verify_frame(mesh: &TetMesh, f: &FrameBake) -> Vec<String> {
    let mut errs = Vec::new();
    let n = mesh.n_tets();
    let lens = [
        f.rank.len(),
        f.solid_frac.len(),
        f.volume.len(),
        f.capacity.len(),
        f.surf_normal.len(),
        f.surf_velocity.len(),
        f.surf_phi.len(),
        f.adhesion_alpha.len(),
        f.adhesion_dir.len(),
        f.hair_frac.len(),
        f.hair_dir.len(),
        f.disabled.len(),
        f.pocket.len(),
        f.escalation.offsets.len() - 1,
    ];
    if lens.iter().any(|&l| l != n) || f.positions.len() != mesh.n_nodes() || f.velocities.len() != mesh.n_nodes() {
        errs.push("array length does not match the mesh".to_string());
        return errs;
    }
    if f.positions
        .iter()
        .chain(&f.velocities)
        .any(|p| !p.iter().all(|c| c.is_finite()))
    {
        errs.push("non-finite node position or velocity".to_string());
    }
    for t in 0..n {
        let (r, sf, hf) = (f.rank[t], f.solid_frac[t], f.hair_frac[t]);
        let ok_rank = match r {
            -1 => sf == 1.0,
            0 => sf > 0.0 && sf < 1.0,
            r if r >= 1 => sf == 0.0,
            _ => false,
        };
        if !ok_rank {
            errs.push(format!("tet {t}: rank {r} inconsistent with solid fraction {sf}"));
        }
        if !(0.0..=1.0).contains(&sf) || !(0.0..=1.0).contains(&hf) || sf + hf > 1.0 + TOL {
            errs.push(format!("tet {t}: fractions out of range (solid {sf}, hair {hf})"));
        }
        let expect = if f.disabled[t] {
            0.0
        } else {
            (f.volume[t] * (1.0 - sf - hf)).max(0.0)
        };
        if (f.capacity[t] - expect).abs() > TOL * f.volume[t].abs().max(1e-300) {
            errs.push(format!("tet {t}: capacity {} != {expect}", f.capacity[t]));
        }
        if (f.surf_normal[t].norm() - 1.0).abs() > TOL {
            errs.push(format!("tet {t}: surface normal not unit"));
        }
        if f.adhesion_alpha[t] < 0.0 {
            errs.push(format!("tet {t}: negative adhesion"));
        }
        if f.is_fluid(t)
            && !mesh.is_boundary(t)
            && !f.pocket[t]
            && f.escalation.of(t).is_empty()
            && !mesh
                .face_neighbors(t)
                .any(|o| f.is_fluid(o as usize) && f.rank[o as usize] > r)
        {
            errs.push(format!("tet {t}: no higher-rank neighbor and no escalation targets"));
        }
    }
    errs
}

impl Bake {
    /// Checks every frame; returns `(frame index, message)` per violation.
    pub fn verify(&self) -> Vec<(usize, String)> {
        self.frames
            .iter()
            .enumerate()
            .flat_map(|(i, f)| {
                verify_frame(&self.mesh, f)
                    .into_iter()
                    .map(move |e| (self.first_frame + i, e))
            })
            .collect()
    }
}
