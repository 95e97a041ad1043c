//! Shared fixtures and oracles for the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wirelayr::diagram::{Instance, InstanceMeta, NodeRole, Pipeline, TreeBuilder, INSTANCE_FORMAT};
use wirelayr::engine::{Layout, Problem};
use wirelayr::geometry::{box_polyline_distance, l1_segment_distance, Box3, Length, Obstacle, Point3, Segment3};
use wirelayr::gridgen::{assemble_forest, hanan_points, GridGraph, GroupMember};
use wirelayr::milp::assignment_from_paths;

pub fn pt(x: i64, y: i64, z: i64) -> Point3 {
    Point3::new(x, y, z)
}

pub fn bx(min: [i64; 3], max: [i64; 3]) -> Box3 {
    Box3::new(min.into(), max.into()).unwrap()
}

pub fn instance(pipelines: Vec<Pipeline>, trees: Vec<wirelayr::diagram::WiringTree>, obstacles: Vec<Obstacle>, delta: Length) -> Instance {
    Instance {
        format: INSTANCE_FORMAT,
        region: bx([-50, -50, -50], [50, 50, 50]),
        pipelines,
        trees,
        obstacles,
        delta,
        pipeline_clearance: None,
        meta: InstanceMeta::default(),
    }
}

/// Two trees on one pipeline whose only grid lines through a wall opening
/// are two units apart. Infeasible for `delta >= 3`, feasible below.
pub fn corridor(delta: Length) -> Instance {
    let pipe = Pipeline { id: "c".into(), polyline: vec![pt(0, -10, 0), pt(0, 10, 0)] };
    let a = TreeBuilder::new("A", "c", "ar").leaf("ar", "al", pt(20, 0, 0)).build();
    let b = TreeBuilder::new("B", "c", "br").leaf("br", "bl", pt(20, 2, 0)).build();
    // opening interior is y in 0..=2 at z = 0, four units wide
    let wall = Obstacle::wall(bx([10, -20, -20], [11, 20, 20]), vec![bx([10, -1, -1], [11, 3, 1])], 0);
    instance(vec![pipe], vec![a, b], vec![wall], delta)
}

/// Hanan coordinate counts per axis of each parent-children group.
pub fn group_sizes(inst: &Instance) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for tree in &inst.trees {
        let pipe = inst.pipeline(&tree.pipeline).unwrap();
        for node in &tree.nodes {
            if node.children.is_empty() {
                continue;
            }
            let mut group = vec![match node.role {
                NodeRole::Root => GroupMember::Pipeline(&pipe.polyline),
                _ => GroupMember::Region(node.region().unwrap()),
            }];
            for c in &node.children {
                group.push(GroupMember::Region(tree.node(c).unwrap().region().unwrap()));
            }
            out.push(hanan_points(&group).unwrap().sizes());
        }
    }
    out
}

fn small_box(rng: &mut ChaCha8Rng, z: i64) -> Box3 {
    let lo = pt(rng.gen_range(1..=2), rng.gen_range(0..=2), z);
    // flat in at least one axis keeps the admissible set at four vertices or fewer
    let flat = rng.gen_range(0..3);
    let mut hi = lo;
    for k in 0..3 {
        if k != flat && rng.gen_bool(0.5) {
            hi = hi.with_coord(k, lo.coord(k) + rng.gen_range(1..=2));
        }
    }
    Box3::spanning(lo, hi)
}

/// Random two-tree instance small enough for exhaustive search: every
/// admissible set has at most four vertices and every group grid at most
/// three coordinates per axis. The trees hang off two pipelines four units
/// apart in z and reach towards each other, so larger separations bite.
/// Rejection-sampled, so always returns.
pub fn tiny_instance(seed: u64) -> Instance {
    const GAP: i64 = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let delta = rng.gen_range(1..=3);
        let pipes: Vec<Pipeline> =
            (0..2).map(|t| Pipeline { id: format!("p{t}"), polyline: vec![pt(0, 0, t * GAP), pt(0, 2, t * GAP)] }).collect();
        let mut trees = Vec::new();
        for t in 0..2i64 {
            // tree 0 works upwards from z = 0, tree 1 downwards from z = GAP
            let z = |rng: &mut ChaCha8Rng| if t == 0 { rng.gen_range(0..=2) } else { GAP - rng.gen_range(0..=2) };
            let root = format!("t{t}r");
            let leaf = |rng: &mut ChaCha8Rng| pt(rng.gen_range(3..=5), rng.gen_range(0..=2), z(rng));
            let b = TreeBuilder::new(format!("t{t}"), format!("p{t}"), &root);
            let v = format!("t{t}v");
            let tree = match rng.gen_range(0..3) {
                0 => b.leaf(&root, format!("t{t}l0"), leaf(&mut rng)).build(),
                1 => {
                    let r = small_box(&mut rng, if t == 0 { 0 } else { GAP - 1 });
                    b.intermediate(&root, &v, r).leaf(&v, format!("t{t}l0"), leaf(&mut rng)).build()
                }
                _ => {
                    let r = small_box(&mut rng, if t == 0 { 0 } else { GAP - 1 });
                    let (l0, l1) = (leaf(&mut rng), leaf(&mut rng));
                    b.intermediate(&root, &v, r).leaf(&v, format!("t{t}l0"), l0).leaf(&v, format!("t{t}l1"), l1).build()
                }
            };
            trees.push(tree);
        }
        let inst = instance(pipes, trees, vec![], delta);
        if !wirelayr::diagram::validate_instance(&inst).is_empty() {
            continue;
        }
        if group_sizes(&inst).iter().any(|s| s.iter().any(|&n| n > 3)) {
            continue;
        }
        let Ok(graphs) = assemble_forest(&inst) else { continue };
        if graphs.iter().any(|g| g.admissible.iter().any(|s| s.len() > 4)) {
            continue;
        }
        return inst;
    }
}

/// Dijkstra distances to `target` over `g`, never entering `blocked`.
pub fn distances_to(g: &GridGraph, target: u32, blocked: &[bool]) -> Vec<Length> {
    let mut d = vec![Length::MAX; g.vertices.len()];
    let mut heap = BinaryHeap::from([Reverse((0, target))]);
    d[target as usize] = 0;
    while let Some(Reverse((du, u))) = heap.pop() {
        if du > d[u as usize] {
            continue;
        }
        // graph is symmetric, so in-arcs give distances *to* the target
        for &a in &g.in_arcs[u as usize] {
            let arc = g.arcs[a as usize];
            let t = arc.tail as usize;
            if blocked[t] && arc.tail != target {
                continue;
            }
            let nd = du + arc.length;
            if nd < d[t] {
                d[t] = nd;
                heap.push(Reverse((nd, arc.tail)));
            }
        }
    }
    d
}

struct EdgeJob {
    tree: usize,
    /// node indices of the edge
    parent: usize,
    child: usize,
}

struct Placed {
    tree: usize,
    nodes: (usize, usize),
    segs: Vec<Segment3>,
    /// undirected grid edges as sorted vertex pairs
    uedges: Vec<(u32, u32)>,
}

struct Oracle<'a> {
    inst: &'a Instance,
    graphs: &'a [GridGraph],
    jobs: Vec<EdgeJob>,
    /// per tree: vertices a connection may not pass through
    leaf_vertices: Vec<Vec<bool>>,
    /// per tree: segments of pipelines other than its own
    foreign: Vec<Vec<Segment3>>,
    clearance: Length,
    best: Option<Length>,
}

/// Whether one more segment of connection `nodes` in `tree` is compatible
/// with everything placed so far and with foreign pipelines.
struct Step<'o> {
    placed: &'o [Placed],
    foreign: &'o [Segment3],
    tree: usize,
    nodes: (usize, usize),
    delta: Length,
    clearance: Length,
}

impl Step<'_> {
    fn allows(&self, seg: &Segment3, uedge: (u32, u32)) -> bool {
        if self.foreign.iter().any(|p| l1_segment_distance(seg, p) < self.clearance) {
            return false;
        }
        for p in self.placed {
            if p.tree == self.tree {
                if p.uedges.contains(&uedge) {
                    return false;
                }
                let (a, b) = p.nodes;
                let (c, d) = self.nodes;
                if a == c || a == d || b == c || b == d {
                    continue;
                }
            }
            if self.delta > 0 && p.segs.iter().any(|s| l1_segment_distance(s, seg) < self.delta) {
                return false;
            }
        }
        true
    }
}

impl Oracle<'_> {
    /// Depth-first over the connection jobs; every simple path of a job is
    /// tried whose length still fits under `budget`.
    fn search(&mut self, placement: &[Vec<u32>], j: usize, cost: Length, placed: &mut Vec<Placed>, budget: Length) {
        if j == self.jobs.len() {
            if self.best.is_none_or(|b| cost < b) {
                self.best = Some(cost);
            }
            return;
        }
        let limit = match self.best {
            Some(b) => b.min(budget + 1) - 1,
            None => budget,
        };
        // forward check: every remaining job must still have a compatible
        // path, and their shortest compatible lengths bound the rest
        let mut dists = Vec::with_capacity(self.jobs.len() - j);
        let mut lb = 0;
        for k in j..self.jobs.len() {
            let EdgeJob { tree, parent, child } = self.jobs[k];
            let step = self.step(placed, k);
            let (s, t) = (placement[tree][parent], placement[tree][child]);
            let d = constrained_distances_to(&self.graphs[tree], t, &self.leaf_vertices[tree], &step);
            if d[s as usize] == Length::MAX {
                return;
            }
            lb += d[s as usize];
            dists.push(d);
        }
        if cost + lb > limit {
            return;
        }
        let EdgeJob { tree, parent, child } = self.jobs[j];
        let g = &self.graphs[tree];
        let (s, t) = (placement[tree][parent], placement[tree][child]);
        let dist = &dists[0];
        let others = lb - dist[s as usize];
        let mut on_path = vec![false; g.vertices.len()];
        let mut path = vec![s];
        on_path[s as usize] = true;
        let mut paths = Vec::new();
        let room = limit - cost - others;
        let step = self.step(placed, j);
        enumerate(g, dist, &self.leaf_vertices[tree], &step, t, &mut path, &mut on_path, 0, room, &mut paths);
        paths.sort_by_key(|(len, _)| *len);
        for (len, p) in paths {
            let limit = match self.best {
                Some(b) => b.min(budget + 1) - 1,
                None => budget,
            };
            if cost + len + others > limit {
                break;
            }
            let segs: Vec<Segment3> =
                p.windows(2).map(|w| Segment3::new(g.vertices[w[0] as usize], g.vertices[w[1] as usize]).unwrap()).collect();
            let uedges = p.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect();
            placed.push(Placed { tree, nodes: (parent, child), segs, uedges });
            self.search(placement, j + 1, cost + len, placed, budget);
            placed.pop();
        }
    }

    fn step<'s>(&'s self, placed: &'s [Placed], k: usize) -> Step<'s> {
        let EdgeJob { tree, parent, child } = self.jobs[k];
        Step { placed, foreign: &self.foreign[tree], tree, nodes: (parent, child), delta: self.inst.delta, clearance: self.clearance }
    }
}

/// Like `distances_to`, but only over arcs `step` allows.
fn constrained_distances_to(g: &GridGraph, target: u32, blocked: &[bool], step: &Step<'_>) -> Vec<Length> {
    let mut d = vec![Length::MAX; g.vertices.len()];
    let mut heap = BinaryHeap::from([Reverse((0, target))]);
    d[target as usize] = 0;
    while let Some(Reverse((du, u))) = heap.pop() {
        if du > d[u as usize] {
            continue;
        }
        for &a in &g.in_arcs[u as usize] {
            let arc = g.arcs[a as usize];
            let t = arc.tail as usize;
            if blocked[t] && arc.tail != target {
                continue;
            }
            let nd = du + arc.length;
            if nd >= d[t] {
                continue;
            }
            let seg = Segment3::new(g.vertices[t], g.vertices[u as usize]).unwrap();
            if !step.allows(&seg, (arc.tail.min(u), arc.tail.max(u))) {
                continue;
            }
            d[t] = nd;
            heap.push(Reverse((nd, arc.tail)));
        }
    }
    d
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    g: &GridGraph,
    dist: &[Length],
    blocked: &[bool],
    step: &Step<'_>,
    t: u32,
    path: &mut Vec<u32>,
    on_path: &mut [bool],
    len: Length,
    room: Length,
    out: &mut Vec<(Length, Vec<u32>)>,
) {
    let u = *path.last().unwrap();
    if u == t {
        out.push((len, path.clone()));
        return;
    }
    for &a in &g.out_arcs[u as usize] {
        let arc = g.arcs[a as usize];
        let h = arc.head as usize;
        if on_path[h] || (blocked[h] && arc.head != t) || dist[h] == Length::MAX {
            continue;
        }
        let nl = len + arc.length;
        if nl + dist[h] > room {
            continue;
        }
        let seg = Segment3::new(g.vertices[u as usize], g.vertices[h]).unwrap();
        if !step.allows(&seg, (u.min(arc.head), u.max(arc.head))) {
            continue;
        }
        on_path[h] = true;
        path.push(arc.head);
        enumerate(g, dist, blocked, step, t, path, on_path, nl, room, out);
        path.pop();
        on_path[h] = false;
    }
}

/// Exact optimum by enumerating every placement and, per placement, every
/// combination of simple connection paths under the separation rules,
/// checked on raw segment geometry. `None` when no layout exists.
pub fn brute_force(inst: &Instance) -> Option<Length> {
    let graphs = assemble_forest(inst).ok()?;
    let mut jobs = Vec::new();
    let mut leaf_vertices = Vec::new();
    let mut foreign = Vec::new();
    for (t, (tree, g)) in inst.trees.iter().zip(&graphs).enumerate() {
        for (p, c) in &tree.edges {
            jobs.push(EdgeJob { tree: t, parent: tree.node_index(p).unwrap(), child: tree.node_index(c).unwrap() });
        }
        let mut lv = vec![false; g.vertices.len()];
        for n in tree.leaves() {
            if let NodeRole::Leaf { point } = n.role {
                lv[g.vertex_index(&point).unwrap() as usize] = true;
            }
        }
        leaf_vertices.push(lv);
        foreign.push(
            inst.pipelines
                .iter()
                .filter(|p| p.id != tree.pipeline)
                .flat_map(|p| p.polyline.windows(2).map(|w| Segment3::new(w[0], w[1]).unwrap()))
                .collect(),
        );
    }
    // paths end on their leaf points, so two leaves too close for their
    // connections to coexist settle the instance without any search
    let leaf_of = |j: &EdgeJob| match inst.trees[j.tree].nodes[j.child].role {
        NodeRole::Leaf { point } => Some(point),
        _ => None,
    };
    for (a, ja) in jobs.iter().enumerate() {
        let Some(pa) = leaf_of(ja) else { continue };
        let own = &inst.trees[ja.tree].pipeline;
        if inst
            .pipelines
            .iter()
            .any(|p| &p.id != own && box_polyline_distance(&Box3::point(pa), &p.polyline).unwrap() < inst.pipeline_clearance())
        {
            return None;
        }
        for jb in &jobs[a + 1..] {
            let Some(pb) = leaf_of(jb) else { continue };
            let shares = ja.tree == jb.tree && (ja.parent == jb.parent || ja.parent == jb.child || ja.child == jb.parent);
            if !shares && inst.delta > 0 && pa.l1(&pb) < inst.delta {
                return None;
            }
        }
    }
    let mut oracle = Oracle { inst, graphs: &graphs, jobs, leaf_vertices, foreign, clearance: inst.pipeline_clearance(), best: None };

    // all placements: one admissible vertex per node
    let sets: Vec<&Vec<u32>> = graphs.iter().flat_map(|g| g.admissible.iter()).collect();
    let mut choice = vec![0usize; sets.len()];
    let max_budget: Length = oracle.jobs.iter().map(|j| graphs[j.tree].arcs.iter().map(|a| a.length).sum::<Length>() / 2).sum();
    let mut placements = Vec::new();
    loop {
        let mut k = 0;
        let placement: Vec<Vec<u32>> = inst
            .trees
            .iter()
            .map(|tree| {
                let v = tree.nodes.iter().map(|_| {
                    k += 1;
                    sets[k - 1][choice[k - 1]]
                });
                v.collect()
            })
            .collect();
        placements.push(placement);
        let mut i = 0;
        while i < choice.len() {
            choice[i] += 1;
            if choice[i] < sets[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == choice.len() {
            break;
        }
    }

    // grow the budget until something fits; the final round is exhaustive
    let mut slack = 0;
    loop {
        for placement in &placements {
            let lens: Vec<Length> = oracle
                .jobs
                .iter()
                .map(|j| {
                    let d = distances_to(&graphs[j.tree], placement[j.tree][j.child], &oracle.leaf_vertices[j.tree]);
                    d[placement[j.tree][j.parent] as usize]
                })
                .collect();
            if lens.contains(&Length::MAX) {
                continue;
            }
            let budget = lens.iter().sum::<Length>() + slack;
            oracle.search(placement, 0, 0, &mut Vec::new(), budget);
        }
        if oracle.best.is_some() || slack > max_budget {
            return oracle.best;
        }
        slack = (slack * 2).max(4);
    }
}

/// The 0/1 assignment of a layout in the problem's column space.
pub fn layout_assignment(p: &Problem<'_>, layout: &Layout) -> Vec<bool> {
    let mut placements = Vec::new();
    let mut edge_arcs = Vec::new();
    let mut paths = layout.paths.iter();
    for (tree, g) in p.inst.trees.iter().zip(&p.graphs) {
        placements.push(tree.nodes.iter().map(|n| g.vertex_index(&layout.placements[&n.id])).collect::<Vec<_>>());
        let mut arcs = Vec::new();
        for _ in &tree.edges {
            let path = paths.next().unwrap();
            let ids: Vec<u32> = path
                .vertices
                .windows(2)
                .map(|w| g.arc_between(g.vertex_index(&w[0]).unwrap(), g.vertex_index(&w[1]).unwrap()).unwrap())
                .collect();
            arcs.push(ids);
        }
        edge_arcs.push(arcs);
    }
    assignment_from_paths(&p.model.index, &placements, &edge_arcs)
}

/// Sorted list of the distinct leaf points, handy for sanity checks.
pub fn leaf_points(inst: &Instance) -> BTreeSet<Point3> {
    inst.trees
        .iter()
        .flat_map(|t| t.nodes.iter())
        .filter_map(|n| match n.role {
            NodeRole::Leaf { point } => Some(point),
            _ => None,
        })
        .collect()
}
