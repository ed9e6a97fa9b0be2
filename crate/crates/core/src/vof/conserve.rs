use log::warn;

use super::{LedgerEntry, TransferLedger, WaterState, EPS_W};
use crate::bake::FrameBake;
use crate::mesh::{tet_positions, TetMesh, NO_TET};
use crate::Vec3;

/// Safety valve on pushout sweeps.
pub const MAX_SWEEPS: usize = 64;

/// Excess below this fraction of capacity counts as saturated, not over.
const SAT_REL: f64 = 1e-13;

fn excess(state: &WaterState, f: &FrameBake, t: usize) -> f64 {
    let e = state.water[t] - f.capacity[t];
    if e > SAT_REL * f.capacity[t] {
        e
    } else {
        0.0
    }
}

/// Moves `vol` of water (with its share of momentum) out of `t`.
fn take(state: &mut WaterState, t: usize, vol: f64) -> Vec3 {
    let w = state.water[t];
    let m = state.momentum[t] * (vol / w);
    state.water[t] -= vol;
    state.momentum[t] -= m;
    m
}

fn give(state: &mut WaterState, t: usize, vol: f64, mom: Vec3) {
    state.water[t] += vol;
    state.momentum[t] += mom;
}

/// Fluid tets ordered by rank, then id: the sweep order of pushout and
/// velocity correction.
pub fn rank_order(f: &FrameBake) -> Vec<u32> {
    let mut order: Vec<u32> = (0..f.n_tets()).filter(|&t| f.is_fluid(t)).map(|t| t as u32).collect();
    order.sort_by_key(|&t| (f.rank[t as usize], t));
    order
}

/// One Jacobi pass: every oversaturated interior tet (by the state at entry)
/// splits its excess equally among its fluid face neighbors.
pub fn smear(state: &mut WaterState, mesh: &TetMesh, f: &FrameBake) {
    let n = mesh.n_tets();
    let mut moves: Vec<(usize, f64, Vec3, [u32; 4], usize)> = Vec::new();
    for t in 0..n {
        if !f.is_fluid(t) || mesh.is_boundary(t) {
            continue;
        }
        let e = excess(state, f, t);
        if e <= 0.0 {
            continue;
        }
        let mut to = [NO_TET; 4];
        let mut k = 0;
        for o in mesh.face_neighbors(t) {
            if f.is_fluid(o as usize) {
                to[k] = o;
                k += 1;
            }
        }
        if k == 0 {
            continue;
        }
        let m = state.momentum[t] * (e / state.water[t]);
        moves.push((t, e, m, to, k));
    }
    for (t, e, m, to, k) in moves {
        state.water[t] -= e;
        state.momentum[t] -= m;
        let (de, dm) = (e / k as f64, m / k as f64);
        for &o in &to[..k] {
            give(state, o as usize, de, dm);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PushoutStats {
    pub sweeps: usize,
    pub converged: bool,
}

/// Rank-ordered redistribution of excess water.
///
/// Sweeps fluid tets in [`rank_order`]. An oversaturated tet first fills its
/// unsaturated face neighbors as evenly as their room allows, then dumps any
/// remainder equally on strictly-higher-rank face neighbors. Failing that a
/// boundary tet spills the remainder into the ledger across its exterior
/// face, any other tet uses its escalation list, and a pocket keeps it.
/// Sweeps repeat until one moves nothing (at most [`MAX_SWEEPS`]).
pub fn pushout(
    state: &mut WaterState,
    mesh: &TetMesh,
    f: &FrameBake,
    order: &[u32],
    ledger: &mut TransferLedger,
) -> PushoutStats {
    let mut stats = PushoutStats::default();
    let mut room: Vec<(f64, usize)> = Vec::with_capacity(4);
    let mut targets: Vec<usize> = Vec::with_capacity(4);
    while stats.sweeps < MAX_SWEEPS {
        stats.sweeps += 1;
        let mut moved = false;
        for &t in order {
            let t = t as usize;
            let mut e = excess(state, f, t);
            if e <= 0.0 {
                continue;
            }

            room.clear();
            for o in mesh.face_neighbors(t) {
                let o = o as usize;
                if f.is_fluid(o) && state.water[o] < f.capacity[o] {
                    room.push((f.capacity[o] - state.water[o], o));
                }
            }
            if !room.is_empty() {
                moved = true;
                room.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut left = room.len();
                for &(r, o) in room.iter() {
                    let share = e / left as f64;
                    if r <= share {
                        let m = take(state, t, r);
                        state.water[o] = f.capacity[o];
                        state.momentum[o] += m;
                        e -= r;
                    } else {
                        let m = take(state, t, share);
                        give(state, o, share, m);
                        e -= share;
                    }
                    left -= 1;
                }
                if e <= SAT_REL * f.capacity[t] {
                    continue;
                }
            }

            targets.clear();
            targets.extend(
                mesh.face_neighbors(t)
                    .map(|o| o as usize)
                    .filter(|&o| f.is_fluid(o) && f.rank[o] > f.rank[t]),
            );
            if targets.is_empty() && mesh.is_boundary(t) {
                moved = true;
                let m = take(state, t, e);
                let (position, normal) = exterior_face(mesh, &f.positions, t);
                ledger.to_particles.push(LedgerEntry {
                    volume: e,
                    momentum: m,
                    position,
                    normal: Some(normal),
                });
                continue;
            }
            if targets.is_empty() {
                targets.extend(
                    f.escalation
                        .of(t)
                        .iter()
                        .map(|&o| o as usize)
                        .filter(|&o| f.is_fluid(o)),
                );
            }
            if targets.is_empty() {
                continue;
            }
            moved = true;
            let m = take(state, t, e);
            let (de, dm) = (e / targets.len() as f64, m / targets.len() as f64);
            for &o in &targets {
                give(state, o, de, dm);
            }
        }
        if !moved {
            stats.converged = true;
            return stats;
        }
    }
    warn!("pushout stopped after {MAX_SWEEPS} sweeps with excess remaining");
    stats
}

/// Centroid and outward unit normal of the first exterior face of `t`.
fn exterior_face(mesh: &TetMesh, pos: &[Vec3], t: usize) -> (Vec3, Vec3) {
    let v = tet_positions(mesh.tet(t), pos);
    let f = mesh.face_adjacency(t).iter().position(|&o| o == NO_TET).unwrap_or(0);
    let idx: Vec<usize> = (0..4).filter(|&i| i != f).collect();
    let (a, b, c) = (v[idx[0]], v[idx[1]], v[idx[2]]);
    let center = (a + b + c) / 3.0;
    let mut n = (b - a).cross(&(c - a));
    if n.dot(&(center - v[f])) < 0.0 {
        n = -n;
    }
    (center, n.try_normalize(1e-300).unwrap_or_else(Vec3::y))
}

/// One-sided normal-velocity clamp along saturated columns touching the
/// solid. Returns the final per-tet flags.
///
/// Wet cut tets start flagged. In [`rank_order`], a flagged wet tet whose
/// normal velocity is below the object's gets the difference added along the
/// normal; if it was clamped and is saturated, its higher-rank fluid face
/// neighbors become flagged.
pub fn velocity_correction(state: &mut WaterState, mesh: &TetMesh, f: &FrameBake, order: &[u32]) -> Vec<bool> {
    let n = mesh.n_tets();
    let mut flag = vec![false; n];
    for t in 0..n {
        if f.rank[t] == 0 && !f.disabled[t] && state.water[t] > EPS_W {
            flag[t] = true;
        }
    }
    for &t in order {
        let t = t as usize;
        let w = state.water[t];
        if !flag[t] || w <= EPS_W {
            continue;
        }
        let nrm = f.surf_normal[t];
        let u = state.momentum[t] / w;
        let vn = u.dot(&nrm);
        let wn = f.surf_velocity[t].dot(&nrm);
        if vn >= wn {
            continue;
        }
        state.momentum[t] = (u + nrm * (wn - vn)) * w;
        if w >= f.capacity[t] - EPS_W {
            for o in mesh.face_neighbors(t) {
                let o = o as usize;
                if f.is_fluid(o) && f.rank[o] > f.rank[t] {
                    flag[o] = true;
                }
            }
        }
    }
    flag
}
