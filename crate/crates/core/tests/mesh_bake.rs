mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{clipped_fraction, dijkstra_ranks, random_point_in_tet, rng, vertices};
use tetvof::bake::{
    bake, build_escalation, compute_occupancy, compute_ranks, read_bake, write_bake, BakeSpec, MeshConfig,
};
use tetvof::mesh::{
    generate_bcc_lattice, subdivide, tet_positions, tet_volume, Aabb, PointLocator, QuadratureRule, Shape, Solid,
    SolidField, TetMesh,
};
use tetvof::Vec3;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn fat_tet() -> impl Strategy<Value = [Vec3; 4]> {
    [vec3(), vec3(), vec3(), vec3()].prop_filter("degenerate", |v| tet_volume(&v[0], &v[1], &v[2], &v[3]).abs() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swapping_two_vertices_flips_volume_sign(v in fat_tet()) {
        let a = tet_volume(&v[0], &v[1], &v[2], &v[3]);
        let b = tet_volume(&v[1], &v[0], &v[2], &v[3]);
        prop_assert!((a + b).abs() <= 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn subdivision_partitions_any_tet(v in fat_tet()) {
        let v = if tet_volume(&v[0], &v[1], &v[2], &v[3]) < 0.0 { [v[1], v[0], v[2], v[3]] } else { v };
        let mesh = TetMesh::from_tets(4, vec![[0, 1, 2, 3]]).unwrap();
        let (fine, pos, _) = subdivide(&mesh, &v);
        prop_assert_eq!(fine.n_tets(), 8);
        let parent = tet_volume(&v[0], &v[1], &v[2], &v[3]);
        let sum: f64 = (0..8).map(|t| {
            let p = tet_positions(fine.tet(t), &pos);
            tet_volume(&p[0], &p[1], &p[2], &p[3])
        }).sum();
        prop_assert!((sum - parent).abs() <= 1e-12 * parent);
    }

    #[test]
    fn lattice_volume_is_conserved_by_subdivision(ex in 0.3..1.2f64, ey in 0.3..1.2f64, ez in 0.3..1.2f64, dx in 0.15..0.3f64) {
        let (mesh, pos) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::new(ex, ey, ez)), dx).unwrap();
        let vol = |m: &TetMesh, p: &[Vec3]| -> f64 {
            (0..m.n_tets()).map(|t| { let v = tet_positions(m.tet(t), p); tet_volume(&v[0], &v[1], &v[2], &v[3]) }).sum()
        };
        let (fine, fpos, _) = subdivide(&mesh, &pos);
        prop_assert_eq!(fine.n_tets(), 8 * mesh.n_tets());
        let (a, b) = (vol(&mesh, &pos), vol(&fine, &fpos));
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn quadrature_samples_lie_inside(v in fat_tet(), n in prop::sample::select(vec![1usize, 4, 10, 20, 35])) {
        let rule = QuadratureRule::new(n).unwrap();
        let v = if tet_volume(&v[0], &v[1], &v[2], &v[3]) < 0.0 { [v[1], v[0], v[2], v[3]] } else { v };
        let mesh = TetMesh::from_tets(4, vec![[0, 1, 2, 3]]).unwrap();
        let loc = PointLocator::new(&mesh, &v);
        for p in rule.points(&v) {
            prop_assert!(loc.locate(&p).is_some());
        }
    }
}

#[test]
fn subdivided_adjacency_matches_brute_force_face_matching() {
    let (mesh, pos) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::new(0.6, 0.4, 0.5)), 0.2).unwrap();
    let (fine, _, _) = subdivide(&mesh, &pos);
    let faces = |t: usize| {
        let v = fine.tet(t);
        [
            [v[1], v[2], v[3]],
            [v[0], v[2], v[3]],
            [v[0], v[1], v[3]],
            [v[0], v[1], v[2]],
        ]
        .map(|mut f| {
            f.sort_unstable();
            f
        })
    };
    let mut owners: std::collections::HashMap<[u32; 3], Vec<u32>> = Default::default();
    for t in 0..fine.n_tets() {
        for f in faces(t) {
            owners.entry(f).or_default().push(t as u32);
        }
    }
    for t in 0..fine.n_tets() {
        let mut expect: Vec<u32> = faces(t)
            .iter()
            .filter_map(|f| owners[f].iter().copied().find(|&o| o != t as u32))
            .collect();
        let mut got: Vec<u32> = fine.face_neighbors(t).collect();
        expect.sort_unstable();
        got.sort_unstable();
        assert_eq!(got, expect, "tet {t}");
        for o in got {
            assert!(fine.face_neighbors(o as usize).any(|b| b == t as u32));
        }
    }
}

#[test]
fn occupancy_of_centroid_cut_matches_clipping_oracle() {
    let rule = QuadratureRule::new(35).unwrap();
    let mut r = rng(7);
    for _ in 0..50 {
        let v: [Vec3; 4] =
            std::array::from_fn(|_| Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
        if tet_volume(&v[0], &v[1], &v[2], &v[3]).abs() < 1e-2 {
            continue;
        }
        let v = if tet_volume(&v[0], &v[1], &v[2], &v[3]) < 0.0 {
            [v[1], v[0], v[2], v[3]]
        } else {
            v
        };
        let mesh = TetMesh::from_tets(4, vec![[0, 1, 2, 3]]).unwrap();
        let n = Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)).normalize();
        let c = (v[0] + v[1] + v[2] + v[3]) / 4.0;
        let solids = SolidField::new(vec![Solid::fixed(Shape::HalfSpace { point: c, normal: n })]);
        let frac = compute_occupancy(&mesh, &v, &solids, 0.0, &rule)[0];
        // the solid is the side opposite the normal
        let exact = clipped_fraction(&v, &n, n.dot(&c));
        assert!((frac - exact).abs() <= 0.15, "{frac} vs {exact}");
    }
}

#[test]
fn locate_agrees_with_exhaustive_scan_on_subdivided_mesh() {
    let (mesh, pos) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::new(1.0, 0.7, 0.8)), 0.25).unwrap();
    let (mesh, pos, _) = subdivide(&mesh, &pos);
    let loc = PointLocator::new(&mesh, &pos);
    let mut r = rng(3);
    for _ in 0..1000 {
        let p = Vec3::new(r.gen_range(-0.2..1.2), r.gen_range(-0.2..0.9), r.gen_range(-0.2..1.0));
        let brute = (0..mesh.n_tets()).find(|&t| {
            let v = tet_positions(mesh.tet(t), &pos);
            let map = tetvof::mesh::BarycentricMap::new(&v).unwrap();
            map.coords(&p).iter().all(|&l| l >= 1e-7)
        });
        match (loc.locate(&p), brute) {
            (Some((t, _)), Some(b)) => assert_eq!(t as usize, b),
            (None, None) => {}
            (got, b) => {
                // only points within round-off of a face may disagree
                if let Some((t, l)) = got {
                    assert!(b.is_none() && l.iter().any(|&x| x.abs() < 1e-7), "{t} {l:?}");
                }
            }
        }
    }
}

#[test]
fn ranks_match_dijkstra_around_a_sphere() {
    let (mesh, pos) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)), 0.1).unwrap();
    let solids = SolidField::new(vec![Solid::fixed(Shape::Sphere {
        center: Vec3::new(0.45, 0.5, 0.55),
        radius: 0.27,
    })]);
    let sf = compute_occupancy(&mesh, &pos, &solids, 0.0, &QuadratureRule::new(10).unwrap());
    let rank = compute_ranks(&mesh, &sf);
    assert_eq!(rank, dijkstra_ranks(&mesh, &sf));
    assert!(rank.contains(&-1) && rank.iter().any(|&r| r >= 3));
    for t in 0..mesh.n_tets() {
        assert_eq!(rank[t] == -1, sf[t] >= 1.0);
    }
}

/// Two slabs leave a channel two tets wide; channel tets need somewhere to
/// send excess that is not inside the channel.
#[test]
fn narrow_channel_escalates_outside() {
    let (mesh, pos) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)), 0.1).unwrap();
    let solids = SolidField::new(vec![
        Solid::fixed(Shape::Box {
            center: Vec3::new(0.5, 0.25, 0.5),
            half_extents: Vec3::new(0.6, 0.205, 0.3),
        }),
        Solid::fixed(Shape::Box {
            center: Vec3::new(0.5, 0.75, 0.5),
            half_extents: Vec3::new(0.6, 0.205, 0.3),
        }),
    ]);
    let sf = compute_occupancy(&mesh, &pos, &solids, 0.0, &QuadratureRule::new(10).unwrap());
    let rank = compute_ranks(&mesh, &sf);
    let disabled = vec![false; mesh.n_tets()];
    let (esc, pocket) = build_escalation(&mesh, &rank, &disabled);
    let in_channel = |t: usize| {
        let c = (0..4).map(|k| pos[mesh.tet(t)[k] as usize]).sum::<Vec3>() / 4.0;
        (c.z - 0.5).abs() < 0.25 && (c.y - 0.5).abs() < 0.05
    };
    let channel: Vec<usize> = (0..mesh.n_tets()).filter(|&t| rank[t] >= 0 && in_channel(t)).collect();
    assert!(!channel.is_empty());
    let with_lists: Vec<usize> = channel.iter().copied().filter(|&t| !esc.of(t).is_empty()).collect();
    assert!(!with_lists.is_empty());
    for &t in &with_lists {
        assert!(
            esc.of(t).iter().any(|&o| !in_channel(o as usize)),
            "tet {t} stuck in channel"
        );
        assert!(!pocket[t]);
    }
}

#[test]
fn enclosed_cavity_is_a_pocket() {
    let (mesh, pos) = generate_bcc_lattice(&Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)), 0.1).unwrap();
    let solids = SolidField::new(vec![Solid::fixed(Shape::Shell {
        center: Vec3::repeat(0.5),
        inner_radius: 0.25,
        outer_radius: 0.4,
    })]);
    let sf = compute_occupancy(&mesh, &pos, &solids, 0.0, &QuadratureRule::new(10).unwrap());
    let rank = compute_ranks(&mesh, &sf);
    let (esc, pocket) = build_escalation(&mesh, &rank, &vec![false; mesh.n_tets()]);
    let centroid = |t: usize| (0..4).map(|k| pos[mesh.tet(t)[k] as usize]).sum::<Vec3>() / 4.0;
    let inner: Vec<usize> = (0..mesh.n_tets())
        .filter(|&t| rank[t] >= 0 && (centroid(t) - Vec3::repeat(0.5)).norm() < 0.15)
        .collect();
    assert!(!inner.is_empty());
    for t in 0..mesh.n_tets() {
        if pocket[t] {
            assert!((centroid(t) - Vec3::repeat(0.5)).norm() < 0.3);
            assert!(esc.of(t).is_empty());
        }
    }
    assert!(inner.iter().any(|&t| pocket[t]));
}

fn spinning_spec() -> BakeSpec {
    BakeSpec {
        mesh: MeshConfig {
            bounds: Aabb::new(Vec3::zeros(), Vec3::repeat(0.6)),
            dx: 0.15,
            subdivisions: 0,
            n_samples: 4,
        },
        skinning: Default::default(),
        solids: SolidField::new(vec![Solid {
            shape: Shape::Sphere {
                center: Vec3::repeat(0.3),
                radius: 0.12,
            },
            motion: tetvof::mesh::RigidMotion {
                velocity: Vec3::new(0.05, 0.0, 0.0),
                angular_velocity: Vec3::new(0.0, 2.0, 0.0),
                pivot: Vec3::repeat(0.3),
            },
        }]),
        paint: Vec::new(),
        strands: Vec::new(),
        dt: 0.01,
    }
}

#[test]
fn bake_file_round_trip_verifies() {
    let spec = spinning_spec();
    let b = bake(&spec, 0, 3).unwrap();
    assert_eq!(b.frames.len(), 4);
    assert!(b.verify().is_empty(), "{:?}", b.verify());
    let mut buf = Vec::new();
    write_bake(&mut buf, &b).unwrap();
    let back = read_bake(&mut buf.as_slice()).unwrap();
    assert_eq!(back, b);
    // truncated files are rejected, not misread
    assert!(read_bake(&mut &buf[..buf.len() / 2]).is_err());
}

#[test]
fn bake_is_deterministic() {
    let spec = spinning_spec();
    let a = bake(&spec, 0, 2).unwrap();
    let b = bake(&spec, 0, 2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn partial_range_matches_full_bake() {
    let spec = spinning_spec();
    let full = bake(&spec, 0, 3).unwrap();
    let part = bake(&spec, 2, 3).unwrap();
    assert_eq!(part.first_frame, 2);
    for f in 2..=3 {
        let (a, b) = (full.frame(f), part.frame(f));
        assert_eq!(a.rank, b.rank);
        for (p, q) in a.positions.iter().zip(&b.positions) {
            assert!((p - q).norm() < 1e-9);
        }
    }
}

#[test]
fn random_points_in_tets_stay_inside() {
    let (mesh, f) = common::open_box(Vec3::zeros(), Vec3::repeat(0.5), 0.25);
    let loc = PointLocator::new(&mesh, &f.positions);
    let mut r = rng(1);
    for t in 0..mesh.n_tets() {
        for _ in 0..20 {
            let p = random_point_in_tet(&mut r, &vertices(&mesh, &f, t));
            assert_eq!(loc.locate(&p).map(|x| x.0 as usize), Some(t));
        }
    }
}
