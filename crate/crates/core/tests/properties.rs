mod common;

use std::time::Duration;

use proptest::prelude::*;

use common::tiny_instance;
use wirelayr::diagram::validate_instance;
use wirelayr::engine::{solve_instance, SolveParams};
use wirelayr::geometry::{l1_segment_distance, Box3, Length, Point3, Segment3};
use wirelayr::gridgen::{build_group_grid, hanan_points, GroupMember};
use wirelayr::synth::{generate, GeneratorParams};
use wirelayr::validate::{check_layout, BendGap, ViolationKind};

fn point() -> impl Strategy<Value = Point3> {
    (-8i64..8, -8i64..8, -8i64..8).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn segment() -> impl Strategy<Value = Segment3> {
    (point(), 0usize..3, 1i64..6).prop_map(|(a, axis, len)| Segment3::new(a, a.with_coord(axis, a.coord(axis) + len)).unwrap())
}

fn region() -> impl Strategy<Value = Box3> {
    (point(), 0i64..5, 0i64..5, 0i64..5).prop_map(|(a, dx, dy, dz)| Box3::spanning(a, Point3::new(a.x + dx, a.y + dy, a.z + dz)))
}

fn lattice(s: &Segment3) -> Vec<Point3> {
    let (k, lo, hi) = (s.axis(), s.bounds().lo(s.axis()), s.bounds().hi(s.axis()));
    (lo..=hi).map(|v| s.a.with_coord(k, v)).collect()
}

fn box_lattice(b: &Box3) -> Vec<Point3> {
    let mut out = Vec::new();
    for x in b.min.x..=b.max.x {
        for y in b.min.y..=b.max.y {
            for z in b.min.z..=b.max.z {
                out.push(Point3::new(x, y, z));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // on integer coordinates the closest pair is always a lattice pair
    #[test]
    fn segment_distance_is_closest_lattice_pair(s in segment(), t in segment()) {
        let brute = lattice(&s).iter().flat_map(|p| lattice(&t).into_iter().map(move |q| p.l1(&q))).min().unwrap();
        prop_assert_eq!(l1_segment_distance(&s, &t), brute);
        prop_assert_eq!(l1_segment_distance(&t, &s), brute);
    }

    #[test]
    fn box_distance_is_closest_lattice_pair(a in region(), b in region()) {
        let pa = box_lattice(&a);
        let brute = box_lattice(&b).iter().flat_map(|q| pa.iter().map(move |p| p.l1(q))).min().unwrap();
        prop_assert_eq!(a.l1_distance(&b), brute);
        prop_assert_eq!(a.intersects(&b), brute == 0);
    }

    #[test]
    fn hanan_grid_counts(boxes in prop::collection::vec(region(), 1..4)) {
        let members: Vec<GroupMember> = boxes.iter().map(|b| GroupMember::Region(*b)).collect();
        let coords = hanan_points(&members).unwrap();
        let n = coords.sizes();
        for (k, axis) in coords.axes.iter().enumerate() {
            prop_assert!(axis.len() <= 2 * boxes.len());
            prop_assert!(axis.windows(2).all(|w| w[0] < w[1]));
            for b in &boxes {
                prop_assert!(axis.contains(&b.lo(k)) && axis.contains(&b.hi(k)));
            }
        }
        let (vs, es) = build_group_grid(&coords);
        prop_assert_eq!(vs.len(), n[0] * n[1] * n[2]);
        let expected: usize = (0..3).map(|k| (n[k] - 1) * n[(k + 1) % 3] * n[(k + 2) % 3]).sum();
        prop_assert_eq!(es.len(), expected);
        for &(i, j) in &es {
            prop_assert_eq!(vs[i].differing_axes(&vs[j]), 1);
        }
    }

    // every corner of every member is a grid vertex
    #[test]
    fn hanan_grid_holds_member_corners(boxes in prop::collection::vec(region(), 1..4)) {
        let members: Vec<GroupMember> = boxes.iter().map(|b| GroupMember::Region(*b)).collect();
        let (vs, _) = build_group_grid(&hanan_points(&members).unwrap());
        for b in &boxes {
            for c in b.corners() {
                prop_assert!(vs.contains(&c));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // a layout feasible at some separation stays feasible at every smaller one
    #[test]
    fn validator_is_monotone_in_delta(seed in 0u64..1000, shrink in 1i64..4) {
        let inst = tiny_instance(seed);
        let out = solve_instance(&inst, &SolveParams { time_limit: Duration::from_secs(10), ..Default::default() });
        if let Some(layout) = out.layout {
            let mut looser = inst.clone();
            looser.delta = (inst.delta - shrink).max(0);
            prop_assert!(check_layout(&looser, &layout, BendGap::default()).is_empty());
            let mut tighter = inst.clone();
            let mut last = 0;
            for d in inst.delta..inst.delta + 4 {
                tighter.delta = d;
                let n = check_layout(&tighter, &layout, BendGap::default()).count(ViolationKind::BranchSeparation);
                prop_assert!(n >= last);
                last = n;
            }
        }
    }

    #[test]
    fn generated_instances_are_well_formed(
        seed in 0u64..10_000,
        pipelines in 1usize..3,
        branches in 1usize..4,
        nodes in prop::sample::select(vec![3usize, 5, 10]),
        delta in prop::sample::select(vec![1 as Length, 3, 5]),
    ) {
        let p = GeneratorParams { seed, pipelines, branches, nodes, delta, cube: 200, ..Default::default() };
        let inst = generate(&p).unwrap();
        prop_assert!(validate_instance(&inst).is_empty());
        prop_assert_eq!(inst.pipelines.len(), pipelines);
        prop_assert_eq!(inst.trees.len(), pipelines * branches);
        prop_assert_eq!(inst.delta, delta);
        for t in &inst.trees {
            prop_assert_eq!(t.nodes.len(), nodes);
            prop_assert_eq!(t.leaves().count(), p.leaves_per_tree());
            for n in &t.nodes {
                if let Some(r) = n.region() {
                    prop_assert!(inst.region.contains_box(&r));
                }
            }
        }
        prop_assert_eq!(generate(&p).unwrap(), inst);
    }
}
