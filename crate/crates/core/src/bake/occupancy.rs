use std::collections::{HashSet, VecDeque};

use rayon::prelude::*;

use crate::mesh::{centroid, tet_positions, QuadratureRule, SolidField, TetMesh, NO_TET};
use crate::Vec3;

/// Number of higher-rank targets collected for a starved tet.
pub const ESCALATION_FANOUT: usize = 4;

/// Upper bound on tets visited by one escalation search.
const ESCALATION_VISIT_CAP: usize = 4096;

/// Relative volume below which a tet counts as collapsed or inverted.
const DEGENERATE_REL: f64 = 1e-6;

/// Fraction of quadrature samples with φ < 0. Tets whose bounding sphere
/// around the centroid clears the surface skip the sampling.
pub fn compute_occupancy(mesh: &TetMesh, pos: &[Vec3], solids: &SolidField, t: f64, rule: &QuadratureRule) -> Vec<f64> {
    if solids.is_empty() {
        return vec![0.0; mesh.n_tets()];
    }
    mesh.tets()
        .par_iter()
        .map(|tet| {
            let v = tet_positions(tet, pos);
            let c = centroid(&v);
            let reach = v.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
            let phi_c = solids.phi(&c, t);
            if phi_c > reach {
                return 0.0;
            }
            if phi_c < -reach {
                return 1.0;
            }
            let inside = rule.points(&v).filter(|p| solids.phi(p, t) < 0.0).count();
            inside as f64 / rule.len() as f64
        })
        .collect()
}

/// −1 for fully solid tets, 0 for cut tets, and otherwise the node-adjacency
/// distance from the cut layer. Fluid tets the cut layer cannot reach (or
/// every fluid tet when nothing is cut) get rank 1.
pub fn compute_ranks(mesh: &TetMesh, solid_frac: &[f64]) -> Vec<i32> {
    let n = mesh.n_tets();
    let mut rank: Vec<i32> = solid_frac
        .iter()
        .map(|&f| {
            if f >= 1.0 {
                -1
            } else if f > 0.0 {
                0
            } else {
                i32::MAX
            }
        })
        .collect();
    let mut node_seen = vec![false; mesh.n_nodes()];
    let mut frontier: Vec<usize> = (0..n).filter(|&t| rank[t] == 0).collect();
    let mut level = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &t in &frontier {
            for &node in mesh.tet(t) {
                if node_seen[node as usize] {
                    continue;
                }
                node_seen[node as usize] = true;
                for &o in mesh.tets_of_node(node as usize) {
                    if rank[o as usize] == i32::MAX {
                        rank[o as usize] = level + 1;
                        next.push(o as usize);
                    }
                }
            }
        }
        next.sort_unstable();
        frontier = next;
        level += 1;
    }
    for r in rank.iter_mut() {
        if *r == i32::MAX {
            *r = 1;
        }
    }
    rank
}

/// Flags tets whose signed volume is at most `1e-6 ×` the median |volume|.
pub fn detect_degenerate(volume: &[f64]) -> Vec<bool> {
    if volume.is_empty() {
        return Vec::new();
    }
    let mut abs: Vec<f64> = volume.iter().map(|v| v.abs()).collect();
    let mid = abs.len() / 2;
    let (_, median, _) = abs.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let eps = DEGENERATE_REL * *median;
    volume.iter().map(|&v| !(v > eps)).collect()
}

/// Non-local higher-rank targets per tet, in CSR form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Escalation {
    pub offsets: Vec<u32>,
    pub targets: Vec<u32>,
}

impl Escalation {
    pub fn empty(n_tets: usize) -> Self {
        Self {
            offsets: vec![0; n_tets + 1],
            targets: Vec::new(),
        }
    }

    pub fn of(&self, t: usize) -> &[u32] {
        &self.targets[self.offsets[t] as usize..self.offsets[t + 1] as usize]
    }

    fn from_lists(lists: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        for l in lists {
            targets.extend(l);
            offsets.push(targets.len() as u32);
        }
        Self { offsets, targets }
    }
}

/// Escalation lists and enclosed-pocket flags.
///
/// A fluid tet needs a list when it is interior to the mesh and has no face
/// neighbor of strictly higher rank. Its list holds the first
/// [`ESCALATION_FANOUT`] higher-rank tets found by breadth-first search over
/// face adjacency through fluid tets. When the search finds none the list
/// falls back to the nearest mesh-boundary tet so excess can still leave; a
/// tet whose fluid component touches no boundary is a pocket.
pub fn build_escalation(mesh: &TetMesh, rank: &[i32], disabled: &[bool]) -> (Escalation, Vec<bool>) {
    let n = mesh.n_tets();
    let fluid = |t: usize| rank[t] >= 0 && !disabled[t];

    // Face-connected fluid components, their max rank, and the nearest
    // boundary tet of every fluid tet.
    let mut comp = vec![u32::MAX; n];
    let mut comp_max: Vec<i32> = Vec::new();
    let mut queue = VecDeque::new();
    for s in 0..n {
        if !fluid(s) || comp[s] != u32::MAX {
            continue;
        }
        let id = comp_max.len() as u32;
        let mut max_rank = rank[s];
        comp[s] = id;
        queue.push_back(s);
        while let Some(t) = queue.pop_front() {
            max_rank = max_rank.max(rank[t]);
            for o in mesh.face_neighbors(t) {
                let o = o as usize;
                if fluid(o) && comp[o] == u32::MAX {
                    comp[o] = id;
                    queue.push_back(o);
                }
            }
        }
        comp_max.push(max_rank);
    }
    let mut nearest_boundary = vec![NO_TET; n];
    for t in 0..n {
        if fluid(t) && mesh.is_boundary(t) {
            nearest_boundary[t] = t as u32;
            queue.push_back(t);
        }
    }
    while let Some(t) = queue.pop_front() {
        for o in mesh.face_neighbors(t) {
            let o = o as usize;
            if fluid(o) && nearest_boundary[o] == NO_TET {
                nearest_boundary[o] = nearest_boundary[t];
                queue.push_back(o);
            }
        }
    }

    let needs = |t: usize| {
        fluid(t)
            && !mesh.is_boundary(t)
            && !mesh
                .face_neighbors(t)
                .any(|o| fluid(o as usize) && rank[o as usize] > rank[t])
    };

    let results: Vec<(Vec<u32>, bool)> = (0..n)
        .into_par_iter()
        .map(|t| {
            if !needs(t) {
                return (Vec::new(), false);
            }
            let mut found = Vec::new();
            if rank[t] < comp_max[comp[t] as usize] {
                found = search_higher(mesh, rank, disabled, t);
            }
            if found.is_empty() {
                match nearest_boundary[t] {
                    NO_TET => return (Vec::new(), true),
                    b => found.push(b),
                }
            }
            (found, false)
        })
        .collect();
    let pocket = results.iter().map(|r| r.1).collect();
    let esc = Escalation::from_lists(results.into_iter().map(|r| r.0).collect());
    (esc, pocket)
}

fn search_higher(mesh: &TetMesh, rank: &[i32], disabled: &[bool], start: usize) -> Vec<u32> {
    let r = rank[start];
    let mut found = Vec::new();
    let mut visited = HashSet::from([start as u32]);
    let mut queue = VecDeque::from([start]);
    while let Some(t) = queue.pop_front() {
        for o in mesh.face_neighbors(t) {
            let ou = o as usize;
            if rank[ou] < 0 || disabled[ou] || !visited.insert(o) {
                continue;
            }
            if rank[ou] > r {
                found.push(o);
                if found.len() == ESCALATION_FANOUT {
                    return found;
                }
            } else {
                queue.push_back(ou);
            }
            if visited.len() >= ESCALATION_VISIT_CAP {
                return found;
            }
        }
    }
    found
}
