//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tetvof::bake::FrameBake;
use tetvof::mesh::{generate_bcc_lattice, tet_positions, tet_volume, Aabb, TetMesh};
use tetvof::Vec3;

/// Ranks by Dijkstra over the "shares a node" graph of non-solid tets,
/// sourced at the cut tets. Unreached fluid tets get 1.
pub fn dijkstra_ranks(mesh: &TetMesh, solid_frac: &[f64]) -> Vec<i32> {
    let n = mesh.n_tets();
    let solid = |t: usize| solid_frac[t] >= 1.0;
    let mut node_tets: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_nodes()];
    for t in 0..n {
        for &v in mesh.tet(t) {
            node_tets[v as usize].push(t);
        }
    }
    let mut dist = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    for t in 0..n {
        if !solid(t) && solid_frac[t] > 0.0 {
            dist[t] = 0;
            heap.push(Reverse((0u32, t)));
        }
    }
    while let Some(Reverse((d, t))) = heap.pop() {
        if d > dist[t] {
            continue;
        }
        for &v in mesh.tet(t) {
            for &o in &node_tets[v as usize] {
                if solid(o) || o == t {
                    continue;
                }
                if d + 1 < dist[o] {
                    dist[o] = d + 1;
                    heap.push(Reverse((d + 1, o)));
                }
            }
        }
    }
    (0..n)
        .map(|t| {
            if solid(t) {
                -1
            } else if dist[t] == u32::MAX {
                1
            } else {
                dist[t] as i32
            }
        })
        .collect()
}

/// Exact volume fraction of a tet on the negative side of the plane
/// `n·x = d`, by clipping.
pub fn clipped_fraction(v: &[Vec3; 4], n: &Vec3, d: f64) -> f64 {
    let s: Vec<f64> = v.iter().map(|p| n.dot(p) - d).collect();
    let vol = |a: &Vec3, b: &Vec3, c: &Vec3, e: &Vec3| tet_volume(a, b, c, e).abs();
    let total = vol(&v[0], &v[1], &v[2], &v[3]);
    let cut = |i: usize, j: usize| v[i] + (v[j] - v[i]) * (s[i] / (s[i] - s[j]));
    let inside: Vec<usize> = (0..4).filter(|&i| s[i] < 0.0).collect();
    let outside: Vec<usize> = (0..4).filter(|&i| s[i] >= 0.0).collect();
    let part = match inside.len() {
        0 => 0.0,
        4 => total,
        1 => {
            let a = inside[0];
            let p: Vec<Vec3> = outside.iter().map(|&o| cut(a, o)).collect();
            vol(&v[a], &p[0], &p[1], &p[2])
        }
        3 => {
            let b = outside[0];
            let p: Vec<Vec3> = inside.iter().map(|&i| cut(i, b)).collect();
            total - vol(&v[b], &p[0], &p[1], &p[2])
        }
        _ => {
            // prism a,p_ac,p_ad | b,p_bc,p_bd
            let (a, b) = (inside[0], inside[1]);
            let (c, e) = (outside[0], outside[1]);
            let (pac, pad, pbc, pbd) = (cut(a, c), cut(a, e), cut(b, c), cut(b, e));
            vol(&v[a], &pac, &pad, &v[b]) + vol(&pac, &pad, &v[b], &pbd) + vol(&pac, &v[b], &pbc, &pbd)
        }
    };
    part / total
}

/// Uniform random point in a tet.
pub fn random_point_in_tet(rng: &mut impl Rng, v: &[Vec3; 4]) -> Vec3 {
    let (mut s, mut t, mut u): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    if s + t > 1.0 {
        s = 1.0 - s;
        t = 1.0 - t;
    }
    if t + u > 1.0 {
        let tmp = u;
        u = 1.0 - s - t;
        t = 1.0 - tmp;
    } else if s + t + u > 1.0 {
        let tmp = u;
        u = s + t + u - 1.0;
        s = 1.0 - t - tmp;
    }
    v[0] + (v[1] - v[0]) * s + (v[2] - v[0]) * t + (v[3] - v[0]) * u
}

/// Rank-1 static frame over a BCC box (no solids).
pub fn open_box(min: Vec3, max: Vec3, dx: f64) -> (TetMesh, FrameBake) {
    let (mesh, pos) = generate_bcc_lattice(&Aabb::new(min, max), dx).unwrap();
    let n = mesh.n_tets();
    let f = FrameBake::from_ranks(&mesh, pos, vec![1; n], 0.0, Vec3::y());
    (mesh, f)
}

pub fn vertices(mesh: &TetMesh, f: &FrameBake, t: usize) -> [Vec3; 4] {
    tet_positions(mesh.tet(t), &f.positions)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Chain of `n` tets where tet `i` uses nodes `i..i+4`, winding up a helix;
/// rank `i` for tet `i`.
pub fn helix_column(n: usize, solid_frac: f64) -> (TetMesh, FrameBake) {
    let pos: Vec<Vec3> = (0..n + 3)
        .map(|k| {
            let a = k as f64 * 2.0;
            Vec3::new(0.1 * a.cos(), 0.05 * k as f64, 0.1 * a.sin())
        })
        .collect();
    let tets = (0..n)
        .map(|i| {
            let t = [i as u32, i as u32 + 1, i as u32 + 2, i as u32 + 3];
            let v = tet_positions(&t, &pos);
            if tet_volume(&v[0], &v[1], &v[2], &v[3]) < 0.0 {
                [t[1], t[0], t[2], t[3]]
            } else {
                t
            }
        })
        .collect();
    let mesh = TetMesh::from_tets(n + 3, tets).unwrap();
    let f = FrameBake::from_ranks(&mesh, pos, (0..n as i32).collect(), solid_frac, Vec3::y());
    (mesh, f)
}

/// Small scene text shared by coupled tests: a shallow pool on a 16³ grid
/// with a mesh block in its middle.
pub fn pool_scene(extra: &str) -> String {
    format!(
        r#"
[domain]
dx = 0.0625
dims = [16, 16, 16]

[mesh]
bounds = {{ min = [0.3, 0.2, 0.3], max = [0.7, 0.6, 0.7] }}
dx = 0.1

[time]
steps = 10
{extra}
"#
    )
}
