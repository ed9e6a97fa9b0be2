use rayon::prelude::*;

use super::{GridSampler, LedgerEntry, TransferLedger, WaterState, EPS_W};
use crate::bake::FrameBake;
use crate::mesh::{centroid, tet_positions, tet_volume, PointLocator, QuadratureRule, SolidField, TetMesh};
use crate::{Error, Result, Vec3};

/// Bisection steps used to clamp a node trace at a solid surface.
pub const TRACE_BISECTIONS: usize = 6;

/// One baked frame together with its point locator.
#[derive(Clone, Copy)]
pub struct MeshFrame<'a> {
    pub bake: &'a FrameBake,
    pub locator: &'a PointLocator,
}

/// Endpoint of `start + disp`, clamped to the last outside point when the
/// trace enters the solid at time `t`. Traces that start inside are left
/// alone.
pub fn clamp_trace(start: &Vec3, disp: &Vec3, solids: &SolidField, t: f64) -> Vec3 {
    let end = start + disp;
    if solids.is_empty() || solids.phi(&end, t) >= 0.0 || solids.phi(start, t) < 0.0 {
        return end;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..TRACE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if solids.phi(&(start + disp * mid), t) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    start + disp * lo
}

fn traced_tet(tet: &[u32; 4], pos: &[Vec3], disp: &Vec3, solids: &SolidField, t: f64) -> [Vec3; 4] {
    let v = tet_positions(tet, pos);
    if *disp == Vec3::zeros() {
        return v;
    }
    v.map(|p| clamp_trace(&p, disp, solids, t))
}

struct Backward {
    requests: Vec<(u32, f64)>,
    pulled: f64,
    pulled_momentum: Vec3,
}

struct Forward {
    deposits: Vec<(u32, f64)>,
    lost: f64,
    lost_at: Vec3,
}

fn check_frames(state: &WaterState, mesh: &TetMesh, frames: [&FrameBake; 2]) -> Result<()> {
    if state.n_tets() != mesh.n_tets() {
        return Err(Error::TopologyMismatch(format!(
            "state has {} tets, mesh has {}",
            state.n_tets(),
            mesh.n_tets()
        )));
    }
    for f in frames {
        if f.positions.len() != mesh.n_nodes() || f.n_tets() != mesh.n_tets() {
            return Err(Error::TopologyMismatch(format!(
                "frame at t = {} has {} nodes / {} tets, mesh has {} / {}",
                f.time,
                f.positions.len(),
                f.n_tets(),
                mesh.n_nodes(),
                mesh.n_tets()
            )));
        }
    }
    Ok(())
}

/// Three-pass advection from `old` to `new`.
///
/// 1. Every fluid tet of the new mesh is translated back by its own velocity
///    times `dt` (nodes clamped at solids) and each of its quadrature samples
///    asks the old tet under it for `volume / n` of water. Samples off the
///    mesh pull that share from grid water instead, without debiting it.
/// 2. Requests against each old tet are scaled down uniformly so they never
///    exceed its water.
/// 3. Whatever an old tet still holds is carried forward by its velocity
///    and split equally among the new tets under its samples. Shares landing
///    off the mesh or in solid/disabled tets go to the ledger.
///
/// Tets left with less than [`EPS_W`] are dried into the ledger as well.
#[allow(clippy::too_many_arguments)]
pub fn advect(
    state: &WaterState,
    mesh: &TetMesh,
    old: MeshFrame,
    new: MeshFrame,
    solids: &SolidField,
    dt: f64,
    rule: &QuadratureRule,
    grid: &dyn GridSampler,
) -> Result<(WaterState, TransferLedger)> {
    check_frames(state, mesh, [old.bake, new.bake])?;
    let n = mesh.n_tets();
    let share_frac = rule.weight();
    let vel: Vec<Vec3> = (0..n).map(|t| state.velocity(t)).collect();

    let backward: Vec<Backward> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut b = Backward {
                requests: Vec::new(),
                pulled: 0.0,
                pulled_momentum: Vec3::zeros(),
            };
            if !new.bake.is_fluid(t) {
                return b;
            }
            let v = traced_tet(mesh.tet(t), &new.bake.positions, &(-vel[t] * dt), solids, old.bake.time);
            let share = tet_volume(&v[0], &v[1], &v[2], &v[3]).abs() * share_frac;
            for p in rule.points(&v) {
                match old.locator.locate(&p) {
                    Some((o, _)) => {
                        if old.bake.is_fluid(o as usize) {
                            match b.requests.iter_mut().find(|r| r.0 == o) {
                                Some(r) => r.1 += share,
                                None => b.requests.push((o, share)),
                            }
                        }
                    }
                    None => {
                        if grid.phi_water(&p) < 0.0 {
                            b.pulled += share;
                            b.pulled_momentum += grid.velocity(&p) * share;
                        }
                    }
                }
            }
            b
        })
        .collect();

    let mut requested = vec![0.0; n];
    for b in &backward {
        for &(o, r) in &b.requests {
            requested[o as usize] += r;
        }
    }
    let scale: Vec<f64> = (0..n)
        .map(|o| {
            let w = state.water[o];
            if requested[o] > w {
                w / requested[o]
            } else {
                1.0
            }
        })
        .collect();

    let mut out = WaterState::new(n);
    let mut ledger = TransferLedger::default();
    for (t, b) in backward.iter().enumerate() {
        for &(o, r) in &b.requests {
            let o = o as usize;
            let w = state.water[o];
            if w <= 0.0 {
                continue;
            }
            let taken = r * scale[o];
            out.water[t] += taken;
            out.momentum[t] += state.momentum[o] * (taken / w);
        }
        out.water[t] += b.pulled;
        out.momentum[t] += b.pulled_momentum;
        ledger.from_grid += b.pulled;
        ledger.from_grid_momentum += b.pulled_momentum;
    }

    let remaining: Vec<f64> = (0..n)
        .map(|o| {
            if requested[o] >= state.water[o] {
                0.0
            } else {
                state.water[o] - requested[o]
            }
        })
        .collect();

    let forward: Vec<Forward> = (0..n)
        .into_par_iter()
        .map(|o| {
            let mut f = Forward {
                deposits: Vec::new(),
                lost: 0.0,
                lost_at: Vec3::zeros(),
            };
            if remaining[o] <= 0.0 {
                return f;
            }
            let v = traced_tet(mesh.tet(o), &old.bake.positions, &(vel[o] * dt), solids, new.bake.time);
            let share = remaining[o] * share_frac;
            let mut lost_samples = 0;
            for p in rule.points(&v) {
                match new.locator.locate(&p) {
                    Some((t, _)) if new.bake.is_fluid(t as usize) => match f.deposits.iter_mut().find(|d| d.0 == t) {
                        Some(d) => d.1 += share,
                        None => f.deposits.push((t, share)),
                    },
                    _ => {
                        f.lost += share;
                        f.lost_at += p;
                        lost_samples += 1;
                    }
                }
            }
            if lost_samples > 0 {
                f.lost_at /= lost_samples as f64;
            }
            f
        })
        .collect();

    for (o, f) in forward.iter().enumerate() {
        if remaining[o] <= 0.0 {
            continue;
        }
        let per_volume = state.momentum[o] / state.water[o];
        for &(t, s) in &f.deposits {
            out.water[t as usize] += s;
            out.momentum[t as usize] += per_volume * s;
        }
        if f.lost > 0.0 {
            ledger.to_particles.push(LedgerEntry {
                volume: f.lost,
                momentum: per_volume * f.lost,
                position: f.lost_at,
                normal: None,
            });
        }
    }

    for t in 0..n {
        let w = out.water[t];
        if w > 0.0 && w < EPS_W {
            ledger.to_particles.push(LedgerEntry {
                volume: w,
                momentum: out.momentum[t],
                position: centroid(&tet_positions(mesh.tet(t), &new.bake.positions)),
                normal: None,
            });
            out.water[t] = 0.0;
        }
        if out.water[t] <= 0.0 {
            out.water[t] = 0.0;
            out.momentum[t] = Vec3::zeros();
        }
    }
    Ok((out, ledger))
}
