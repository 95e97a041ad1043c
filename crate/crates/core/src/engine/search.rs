//! Best-first branch-and-bound over safety conflicts.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::{l1_segment_distance, Box3, Length, Point3};
use crate::milp::LinearConstraint;

use super::layout::Layout;
use super::relax::{solve_tree, Restrictions, TreeCtx, TreeSol, INF, MAX_PENALTY};
use super::{Problem, SolveOutcome, SolveParams, SolveReport, SolveStatus};

/// One side of a branched conflict: undirected grid edges closed either to
/// a whole tree or to one tree edge.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Ban {
    Tree { tree: u32, uedges: Arc<[u32]> },
    Edge { tree: u32, edge: u32, uedges: Arc<[u32]> },
}

impl Ban {
    fn tree(&self) -> usize {
        match *self {
            Ban::Tree { tree, .. } | Ban::Edge { tree, .. } => tree as usize,
        }
    }
}

/// Persistent list of bans shared between a node and its descendants.
struct BanList {
    ban: Ban,
    next: Option<Arc<BanList>>,
}

struct Node {
    bound: Length,
    depth: u32,
    seq: u64,
    bans: Option<Arc<BanList>>,
    sols: Vec<Arc<TreeSol>>,
    /// Static-ban generation the solutions were computed under.
    version: u32,
}

impl Node {
    fn key(&self) -> (Reverse<Length>, u32, Reverse<u64>) {
        (Reverse(self.bound), self.depth, Reverse(self.seq))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// A violated requirement found in a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Conflict {
    /// Two tree edges of one tree on the same undirected grid edge.
    Exclusive { tree: usize, uedge: u32, e: usize, f: usize },
    /// Arcs of two trees closer than the safety distance (global arc ids).
    Cross { g: u32, h: u32 },
    /// Arcs of node-disjoint tree edges of one tree too close (local ids).
    Same { tree: usize, e: usize, a: u32, f: usize, b: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RowKey {
    Pipe(u32),
    Cross(u32),
    Same(usize, usize, u32, usize, u32),
}

#[derive(Default)]
struct Scan {
    pipeline: Vec<u32>,
    conflicts: Vec<(Length, Conflict)>,
}

/// Tree orders tried by the construction heuristic before giving up.
const GREEDY_ORDERS: usize = 8;
/// Safety conflicts whose splits are evaluated at each node.
const CANDIDATE_CONFLICTS: usize = 4;

type Child = (Option<Arc<BanList>>, usize, TreeSol);

struct Search<'p, 'a> {
    p: &'p Problem<'a>,
    params: &'p SolveParams,
    ctxs: Vec<TreeCtx>,
    /// Undirected edges closed to a whole tree by pipeline fixings.
    static_ban: Vec<Vec<bool>>,
    version: u32,
    rows: Vec<LinearConstraint>,
    row_keys: HashSet<RowKey>,
    seq: u64,
}

impl<'p, 'a> Search<'p, 'a> {
    fn new(p: &'p Problem<'a>, params: &'p SolveParams) -> Self {
        let ctxs = p.inst.trees.iter().zip(&p.graphs).map(|(t, g)| TreeCtx::new(t, g)).collect();
        let mut static_ban: Vec<Vec<bool>> = p.graphs.iter().map(|g| vec![false; g.num_edges()]).collect();
        if params.eager {
            for (gl, _) in p.catalog.pipeline_forbidden.iter().enumerate().filter(|x| *x.1) {
                let (t, a) = p.model.index.split_global_arc(gl as u32);
                static_ban[t][(a >> 1) as usize] = true;
            }
        }
        // Every leaf keeps one incident arc, so another tree's edge closer
        // than the safety distance to a leaf point is never usable.
        let delta = p.inst.delta;
        if delta > 0 {
            let leaves: Vec<(usize, Box3)> =
                p.inst.trees.iter().enumerate().flat_map(|(u, t)| t.leaves().filter_map(move |n| n.region().map(|b| (u, b)))).collect();
            for (t, g) in p.graphs.iter().enumerate() {
                for (k, ban) in static_ban[t].iter_mut().enumerate().take(g.num_edges()) {
                    let s = g.arc_segment(2 * k as u32).bounds();
                    if leaves.iter().any(|(u, b)| *u != t && b.l1_distance(&s) < delta) {
                        *ban = true;
                    }
                }
            }
        }
        Search { p, params, ctxs, static_ban, version: 0, rows: vec![], row_keys: HashSet::new(), seq: 0 }
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn bans_for(&self, bans: &Option<Arc<BanList>>, t: usize) -> (Vec<bool>, Vec<Vec<u32>>) {
        let mut all = self.static_ban[t].clone();
        let mut per_edge = vec![Vec::new(); self.ctxs[t].edges.len()];
        let mut cur = bans.as_ref();
        while let Some(node) = cur {
            match &node.ban {
                Ban::Tree { tree, uedges } if *tree as usize == t => {
                    for &k in uedges.iter() {
                        all[k as usize] = true;
                    }
                }
                Ban::Edge { tree, edge, uedges } if *tree as usize == t => per_edge[*edge as usize].extend_from_slice(uedges),
                _ => {}
            }
            cur = node.next.as_ref();
        }
        for l in &mut per_edge {
            l.sort_unstable();
            l.dedup();
        }
        (all, per_edge)
    }

    /// Tie-break penalty steering tree `t` away from other trees' arcs.
    fn penalty(&self, t: usize, sols: &[Arc<TreeSol>]) -> Vec<i64> {
        let idx = &self.p.model.index;
        let off = idx.global_arc(t, 0);
        let mut pen = vec![0i64; idx.tree_arcs(t)];
        for (u, sol) in sols.iter().enumerate() {
            if u == t {
                continue;
            }
            for &a in sol.paths.iter().flatten() {
                for &g in self.p.catalog.cross_neighbors(idx.global_arc(u, a)) {
                    if g >= off && ((g - off) as usize) < pen.len() {
                        let slot = &mut pen[(g - off) as usize];
                        *slot = (*slot + 1).min(MAX_PENALTY);
                    }
                }
            }
        }
        pen
    }

    fn solve_one(&self, bans: &Option<Arc<BanList>>, t: usize, pen: Option<&[i64]>) -> TreeSol {
        let (all, per_edge) = self.bans_for(bans, t);
        let r = Restrictions { banned_all: Some(&all), banned_edge: Some(&per_edge), allowed: None, penalty: pen };
        solve_tree(&self.p.graphs[t], &self.ctxs[t], &r)
    }

    fn scan(&self, sols: &[Arc<TreeSol>]) -> Scan {
        let idx = &self.p.model.index;
        let cat = &self.p.catalog;
        // (global arc, tree, tree edge), sorted
        let mut used: Vec<(u32, usize, usize)> = Vec::new();
        for (t, sol) in sols.iter().enumerate() {
            for (e, path) in sol.paths.iter().enumerate() {
                used.extend(path.iter().map(|&a| (idx.global_arc(t, a), t, e)));
            }
        }
        used.sort_unstable();
        let users = |g: u32| {
            let lo = used.partition_point(|x| x.0 < g);
            let hi = used.partition_point(|x| x.0 <= g);
            &used[lo..hi]
        };
        let mut out = Scan::default();
        for &(g, _, _) in &used {
            if cat.pipeline_forbidden[g as usize] && !out.pipeline.contains(&g) {
                out.pipeline.push(g);
            }
        }

        let mut by_uedge: Vec<(usize, u32, usize)> = used.iter().map(|&(g, t, e)| (t, (g - idx.global_arc(t, 0)) >> 1, e)).collect();
        by_uedge.sort_unstable();
        for w in by_uedge.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 && w[0].2 != w[1].2 {
                out.conflicts.push((INF, Conflict::Exclusive { tree: w[0].0, uedge: w[0].1, e: w[0].2, f: w[1].2 }));
            }
        }

        let delta = cat.delta;
        let seg = |g: u32| {
            let (t, a) = idx.split_global_arc(g);
            self.p.graphs[t].arc_segment(a)
        };
        for &(g, t, e) in &used {
            for &h in cat.cross_neighbors(g) {
                if h > g && !users(h).is_empty() {
                    let depth = delta - l1_segment_distance(&seg(g), &seg(h));
                    out.conflicts.push((depth, Conflict::Cross { g, h }));
                }
            }
            for &h in cat.same_neighbors(g) {
                for &(_, _, f) in users(h) {
                    if (h, f) > (g, e) && idx.edges_disjoint(t, e, f) {
                        let off = idx.global_arc(t, 0);
                        let depth = delta - l1_segment_distance(&seg(g), &seg(h));
                        out.conflicts.push((depth, Conflict::Same { tree: t, e, a: g - off, f, b: h - off }));
                    }
                }
            }
        }
        out
    }

    fn materialize(&mut self, key: RowKey, row: Option<LinearConstraint>) {
        if let Some(row) = row {
            if self.row_keys.insert(key) {
                self.rows.push(row);
            }
        }
    }

    /// Add every catalog row the candidate violates (lazy mode only).
    fn materialize_violations(&mut self, scan: &Scan) {
        if self.params.eager {
            return;
        }
        let (idx, cat, m) = (&self.p.model.index, &self.p.catalog, &self.p.model.big_m);
        let mut new = Vec::new();
        for &g in &scan.pipeline {
            for a in [g, g ^ 1] {
                new.push((RowKey::Pipe(a), cat.pipeline_row(idx, a)));
            }
        }
        for &(_, c) in &scan.conflicts {
            match c {
                Conflict::Cross { g, h } => {
                    new.push((RowKey::Cross(g), cat.cross_row(idx, m, g)));
                    new.push((RowKey::Cross(h), cat.cross_row(idx, m, h)));
                }
                Conflict::Same { tree, e, a, f, b } => {
                    new.push((RowKey::Same(tree, e, a, f, b), cat.same_tree_row(idx, tree, (e, a), (f, b))));
                }
                Conflict::Exclusive { .. } => {}
            }
        }
        for (k, r) in new {
            self.materialize(k, r);
        }
    }

    /// Conflicts worth branching on: exclusivity alone if present (depth
    /// INF), otherwise the deepest few safety violations.
    fn pick(scan: &Scan) -> Vec<Conflict> {
        let mut all: Vec<&(Length, Conflict)> = scan.conflicts.iter().collect();
        all.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| conflict_order(&x.1).cmp(&conflict_order(&y.1))));
        let take = if all.first().is_some_and(|x| x.0 >= INF) { 1 } else { CANDIDATE_CONFLICTS };
        all.into_iter().take(take).map(|x| x.1).collect()
    }

    /// Uedges of tree `t` within `r` of point `q`.
    fn ball(&self, t: usize, q: Point3, r: Length) -> Arc<[u32]> {
        let g = &self.p.graphs[t];
        let q = Box3::point(q);
        (0..g.num_edges() as u32).filter(|&k| g.arc_segment(2 * k).bounds().l1_distance(&q) <= r).collect()
    }

    /// Splits around the closest points of two arcs at distance `d`: one
    /// side leaves a ball of radius `r` around its point, the other a ball
    /// of radius `Δ - 1 - d - r`, so every pair across the two is too close.
    fn ball_splits(&self, (t, a): (usize, u32), (u, b): (usize, u32), mk: impl Fn(usize, Arc<[u32]>) -> Ban) -> Vec<[Ban; 2]> {
        let sa = self.p.graphs[t].arc_segment(a);
        let sb = self.p.graphs[u].arc_segment(b);
        let (qa, qb) = closest_points(&sa.bounds(), &sb.bounds());
        let slack = self.p.catalog.delta - 1 - qa.l1(&qb);
        let mut radii = vec![0, slack / 2, slack];
        radii.dedup();
        radii.into_iter().map(|r| [mk(0, self.ball(t, qa, r)), mk(1, self.ball(u, qb, slack - r))]).collect()
    }

    /// Uedges of tree `u` (or of its edge `f`) closer than the safety
    /// distance to global arc `g`.
    fn neighborhood(&self, g: u32, u: usize, same: bool) -> Arc<[u32]> {
        let idx = &self.p.model.index;
        let off = idx.global_arc(u, 0);
        let end = off + idx.tree_arcs(u) as u32;
        let nbrs = if same { self.p.catalog.same_neighbors(g) } else { self.p.catalog.cross_neighbors(g) };
        let mut out: Vec<u32> = nbrs.iter().filter(|&&h| h >= off && h < end).map(|&h| (h - off) >> 1).collect();
        out.sort_unstable();
        out.dedup();
        out.into()
    }

    /// Candidate splits of a conflict. Each is complete: a layout avoiding
    /// both children would have to use both conflicting pieces at once.
    fn branchings(&self, c: Conflict) -> Vec<[Ban; 2]> {
        let idx = &self.p.model.index;
        let one = |k: u32| -> Arc<[u32]> { Arc::from([k]) };
        match c {
            Conflict::Exclusive { tree, uedge, e, f } => vec![[
                Ban::Edge { tree: tree as u32, edge: e as u32, uedges: one(uedge) },
                Ban::Edge { tree: tree as u32, edge: f as u32, uedges: one(uedge) },
            ]],
            Conflict::Cross { g, h } => {
                let (t, a) = idx.split_global_arc(g);
                let (u, b) = idx.split_global_arc(h);
                let trees = [t as u32, u as u32];
                let mut out = self.ball_splits((t, a), (u, b), |side, uedges| Ban::Tree { tree: trees[side], uedges });
                out.extend([
                    [
                        Ban::Tree { tree: t as u32, uedges: one(a >> 1) },
                        Ban::Tree { tree: u as u32, uedges: self.neighborhood(g, u, false) },
                    ],
                    [
                        Ban::Tree { tree: u as u32, uedges: one(b >> 1) },
                        Ban::Tree { tree: t as u32, uedges: self.neighborhood(h, t, false) },
                    ],
                ]);
                out
            }
            Conflict::Same { tree, e, a, f, b } => {
                let off = idx.global_arc(tree, 0);
                let edge = |x: usize, uedges| Ban::Edge { tree: tree as u32, edge: x as u32, uedges };
                let mut out = self.ball_splits((tree, a), (tree, b), |side, uedges| edge([e, f][side], uedges));
                out.extend([
                    [edge(e, one(a >> 1)), edge(f, self.neighborhood(off + a, tree, true))],
                    [edge(f, one(b >> 1)), edge(e, self.neighborhood(off + b, tree, true))],
                ]);
                out
            }
        }
    }

    fn child(&self, parent: &Node, ban: Ban) -> Option<Child> {
        let t = ban.tree();
        let bans = Some(Arc::new(BanList { ban, next: parent.bans.clone() }));
        let pen = self.penalty(t, &parent.sols);
        let sol = self.solve_one(&bans, t, Some(&pen));
        sol.feasible().then_some((bans, t, sol))
    }

    /// Re-solve trees whose solution uses an edge closed since it was computed.
    fn refresh(&self, node: &mut Node) {
        for t in 0..node.sols.len() {
            let stale = node.sols[t].paths.iter().flatten().any(|&a| self.static_ban[t][(a >> 1) as usize]);
            if stale {
                let sol = self.solve_one(&node.bans, t, None);
                node.bound = if sol.feasible() { node.bound - node.sols[t].length + sol.length } else { INF };
                node.sols[t] = Arc::new(sol);
                if node.bound >= INF {
                    return;
                }
            }
        }
        node.version = self.version;
    }

    fn greedy(&self, order: &[usize]) -> Option<Vec<Arc<TreeSol>>> {
        let idx = &self.p.model.index;
        let cat = &self.p.catalog;
        let n = self.ctxs.len();
        // uedges closed to whole trees by other trees' claims and pipelines
        let mut blocked: Vec<Vec<bool>> = (0..n)
            .map(|t| {
                let mut b = self.static_ban[t].clone();
                for a in 0..idx.tree_arcs(t) as u32 {
                    if cat.pipeline_forbidden[idx.global_arc(t, a) as usize] {
                        b[(a >> 1) as usize] = true;
                    }
                }
                b
            })
            .collect();
        let mut sols: Vec<Option<TreeSol>> = vec![None; n];
        for &t in order {
            let g = &self.p.graphs[t];
            let ctx = &self.ctxs[t];
            let ne = ctx.edges.len();
            let mut allowed: Vec<Option<Vec<u32>>> = vec![None; ctx.is_leaf.len()];
            let mut routed: Vec<Option<Vec<u32>>> = vec![None; ne];
            // claimed uedges of this tree and their same-tree exclusion zones
            let mut own: BTreeSet<u32> = BTreeSet::new();
            let mut zone: Vec<(u32, usize)> = Vec::new();
            let mut order_e: Vec<usize> = (0..ne).collect();
            let bfs: Vec<usize> = self.p.inst.trees[t].bfs_order().iter().map(|id| self.p.inst.trees[t].node_index(id).unwrap()).collect();
            order_e.sort_by_key(|&e| bfs.iter().position(|&x| x == ctx.edges[e].1));
            for &e in &order_e {
                let per_edge: Vec<Vec<u32>> = (0..ne)
                    .map(|f| {
                        if routed[f].is_some() {
                            return vec![];
                        }
                        let mut l: Vec<u32> = own.iter().copied().collect();
                        l.extend(zone.iter().filter(|z| idx.edges_disjoint(t, z.1, f)).map(|z| z.0));
                        l.sort_unstable();
                        l.dedup();
                        l
                    })
                    .collect();
                let r =
                    Restrictions { banned_all: Some(&blocked[t]), banned_edge: Some(&per_edge), allowed: Some(&allowed), penalty: None };
                let sol = solve_tree(g, ctx, &r);
                if !sol.feasible() {
                    return None;
                }
                let (s, c) = ctx.edges[e];
                allowed[s] = Some(vec![sol.placement[s]]);
                allowed[c] = Some(vec![sol.placement[c]]);
                let path = sol.paths[e].clone();
                for &a in &path {
                    own.insert(a >> 1);
                    for &h in cat.same_neighbors(idx.global_arc(t, a)) {
                        zone.push(((h - idx.global_arc(t, 0)) >> 1, e));
                    }
                }
                routed[e] = Some(path);
            }
            let placement: Vec<u32> = allowed.iter().map(|a| a.as_ref().map_or(0, |v| v[0])).collect();
            let paths: Vec<Vec<u32>> = routed.into_iter().map(|p| p.unwrap_or_default()).collect();
            // leaves are fixed even when a tree has no edges
            let placement = placement.iter().enumerate().map(|(i, &v)| if ctx.is_leaf[i] { g.admissible[i][0] } else { v }).collect();
            for &a in paths.iter().flatten() {
                for &h in cat.cross_neighbors(idx.global_arc(t, a)) {
                    let (u, b) = idx.split_global_arc(h);
                    blocked[u][(b >> 1) as usize] = true;
                }
            }
            let length = paths.iter().flatten().map(|&a| g.arcs[a as usize].length).sum();
            sols[t] = Some(TreeSol { length, placement, paths });
        }
        let sols: Vec<Arc<TreeSol>> = sols.into_iter().map(|s| Arc::new(s.expect("every tree routed"))).collect();
        let scan = self.scan(&sols);
        (scan.pipeline.is_empty() && scan.conflicts.is_empty()).then_some(sols)
    }

    fn root_certificate(&self, t: usize) -> String {
        let tree = &self.p.inst.trees[t];
        let ctx = &self.ctxs[t];
        for &(s, c) in &ctx.edges {
            let g = &self.p.graphs[t];
            let mut seen = vec![false; g.vertices.len()];
            let mut stack: Vec<u32> = g.admissible[s].clone();
            for &v in &stack {
                seen[v as usize] = true;
            }
            while let Some(u) = stack.pop() {
                if ctx.leaf_vertex[u as usize] {
                    continue;
                }
                for &a in &g.out_arcs[u as usize] {
                    let h = g.arcs[a as usize].head;
                    if !self.static_ban[t][(a >> 1) as usize] && !seen[h as usize] {
                        seen[h as usize] = true;
                        stack.push(h);
                    }
                }
            }
            if !g.admissible[c].iter().any(|&v| seen[v as usize]) {
                return format!(
                    "disconnected required pair: tree '{}' has no admissible path from '{}' to '{}'",
                    tree.id, tree.nodes[s].id, tree.nodes[c].id
                );
            }
        }
        format!("tree '{}' admits no placement connecting all of its nodes", tree.id)
    }
}

/// Closest pair of points between two boxes, one in each.
fn closest_points(a: &Box3, b: &Box3) -> (Point3, Point3) {
    let mut p = [0i64; 3];
    let mut q = [0i64; 3];
    for k in 0..3 {
        let (lo1, hi1, lo2, hi2) = (a.lo(k), a.hi(k), b.lo(k), b.hi(k));
        (p[k], q[k]) = if hi1 < lo2 {
            (hi1, lo2)
        } else if hi2 < lo1 {
            (lo1, hi2)
        } else {
            let m = lo1.max(lo2);
            (m, m)
        };
    }
    (Point3::from(p), Point3::from(q))
}

fn conflict_order(c: &Conflict) -> (u8, usize, u32, usize, u32) {
    match *c {
        Conflict::Exclusive { tree, uedge, e, f } => (0, tree, uedge, e, f as u32),
        Conflict::Cross { g, h } => (1, 0, g, 0, h),
        Conflict::Same { tree, e, a, f, b } => (2, tree, a, e * 65536 + f, b),
    }
}

pub(super) fn run(p: &Problem<'_>, params: &SolveParams) -> SolveOutcome {
    let threads = params.threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| run_inner(p, params, threads))
}

fn run_inner(p: &Problem<'_>, params: &SolveParams, workers: usize) -> SolveOutcome {
    let start = Instant::now();
    let mut s = Search::new(p, params);
    let (cross, same, pipe) = p.catalog.eager_row_counts(&p.model.index);
    let mut report = SolveReport {
        status: SolveStatus::Infeasible,
        objective: None,
        best_bound: None,
        gap: None,
        lazy_rows: 0,
        eager_rows: if params.eager { cross + same + pipe } else { 0 },
        nodes: 0,
        workers,
        certificate: None,
        wall_time: Default::default(),
    };

    let root_sols: Vec<TreeSol> = {
        use rayon::prelude::*;
        (0..s.ctxs.len()).into_par_iter().map(|t| s.solve_one(&None, t, None)).collect()
    };
    if let Some(t) = root_sols.iter().position(|x| !x.feasible()) {
        report.certificate = Some(s.root_certificate(t));
        report.wall_time = start.elapsed();
        report.finish();
        return SolveOutcome { layout: None, report, lazy_rows: vec![] };
    }

    let mut order: Vec<usize> = (0..s.ctxs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut incumbent: Option<(Length, Vec<Arc<TreeSol>>)> = None;
    for _ in 0..GREEDY_ORDERS {
        order.shuffle(&mut rng);
        if let Some(sols) = s.greedy(&order) {
            incumbent = Some((sols.iter().map(|x| x.length).sum(), sols));
            break;
        }
    }

    let root = Node {
        bound: root_sols.iter().map(|x| x.length).sum(),
        depth: 0,
        seq: 0,
        bans: None,
        sols: root_sols.into_iter().map(Arc::new).collect(),
        version: 0,
    };
    let mut queue = BinaryHeap::from([root]);
    let mut proven = false;
    let mut open_bound: Option<Length> = None;
    while let Some(mut node) = queue.pop() {
        if incumbent.as_ref().is_some_and(|(c, _)| node.bound >= *c) {
            proven = true;
            break;
        }
        let over_time = start.elapsed() >= params.time_limit;
        let over_nodes = params.node_limit.is_some_and(|n| report.nodes >= n);
        if over_time || over_nodes {
            open_bound = Some(node.bound);
            break;
        }
        if node.version < s.version {
            s.refresh(&mut node);
            if node.bound < INF {
                queue.push(node);
            }
            continue;
        }
        report.nodes += 1;
        let scan = s.scan(&node.sols);
        s.materialize_violations(&scan);
        if !scan.pipeline.is_empty() {
            for &g in &scan.pipeline {
                let (t, a) = p.model.index.split_global_arc(g);
                s.static_ban[t][(a >> 1) as usize] = true;
            }
            s.version += 1;
            s.refresh(&mut node);
            if node.bound < INF {
                queue.push(node);
            }
            continue;
        }
        let conflicts = Search::pick(&scan);
        if conflicts.is_empty() {
            incumbent = Some((node.bound, node.sols.clone()));
            proven = true;
            break;
        }
        // among the candidate splits keep the one whose weaker child has the
        // higher bound
        let splits: Vec<[Ban; 2]> = conflicts.into_iter().flat_map(|c| s.branchings(c)).collect();
        let evaluated: Vec<(Length, Length, [Option<Child>; 2])> = splits
            .into_par_iter()
            .map(|[b1, b2]| {
                let (c1, c2) = (s.child(&node, b1), s.child(&node, b2));
                let bound = |c: &Option<Child>| c.as_ref().map_or(INF, |(_, t, sol)| node.bound - node.sols[*t].length + sol.length);
                let (l1, l2) = (bound(&c1), bound(&c2));
                (l1.min(l2), l1.max(l2), [c1, c2])
            })
            .collect();
        let mut best = None;
        for cand in evaluated {
            if best.as_ref().is_none_or(|b: &(Length, Length, _)| (cand.0, cand.1) > (b.0, b.1)) {
                best = Some(cand);
            }
        }
        let [c1, c2] = best.expect("at least one split").2;
        for (bans, t, sol) in [c1, c2].into_iter().flatten() {
            let bound = node.bound - node.sols[t].length + sol.length;
            if incumbent.as_ref().is_some_and(|(c, _)| bound >= *c) {
                continue;
            }
            let mut sols = node.sols.clone();
            sols[t] = Arc::new(sol);
            let seq = s.next_seq();
            queue.push(Node { bound, depth: node.depth + 1, seq, bans, sols, version: node.version });
        }
    }
    if open_bound.is_none() && !proven && incumbent.is_some() {
        // queue exhausted with an incumbent: nothing cheaper exists
        proven = true;
    }

    report.lazy_rows = s.rows.len();
    let layout = incumbent.as_ref().map(|(_, sols)| {
        let pl: Vec<&[u32]> = sols.iter().map(|x| x.placement.as_slice()).collect();
        let paths: Vec<&[Vec<u32>]> = sols.iter().map(|x| x.paths.as_slice()).collect();
        Layout::from_vertices(p.inst, &p.graphs, &pl, &paths)
    });
    match (&incumbent, proven) {
        (Some((c, _)), true) => {
            report.status = SolveStatus::Optimal;
            report.objective = Some(*c);
            report.best_bound = Some(*c);
        }
        (Some((c, _)), false) => {
            report.status = SolveStatus::Feasible;
            report.objective = Some(*c);
            report.best_bound = open_bound.map(|b| b.min(*c));
        }
        (None, _) if open_bound.is_some() => {
            report.status = SolveStatus::TimeLimit;
            report.best_bound = open_bound;
        }
        (None, _) => {
            report.status = SolveStatus::Infeasible;
            report.certificate = Some(format!("exhausted search: {} nodes, no conflict-free layout", report.nodes));
        }
    }
    report.wall_time = start.elapsed();
    report.finish();
    SolveOutcome { layout, report, lazy_rows: s.rows }
}

/// Placement and ban restrictions for a standalone bound query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchNode {
    /// Per tree, per node: allowed placement vertices (`None` = all admissible).
    pub placements: Vec<Vec<Option<Vec<u32>>>>,
    /// Per tree: undirected grid edges closed to every tree edge.
    pub banned: Vec<BTreeSet<u32>>,
}

/// Safety-free lower bound on the subproblem of `node`: for each tree the
/// cheapest placement-and-routing under the node's restrictions. `None`
/// when some tree cannot be connected at all.
pub fn lower_bound(p: &Problem<'_>, node: &SearchNode) -> Option<Length> {
    let mut total = 0;
    for (t, (tree, g)) in p.inst.trees.iter().zip(&p.graphs).enumerate() {
        let ctx = TreeCtx::new(tree, g);
        let mut all = vec![false; g.num_edges()];
        if let Some(b) = node.banned.get(t) {
            for &k in b {
                all[k as usize] = true;
            }
        }
        let allowed = node.placements.get(t);
        let r = Restrictions { banned_all: Some(&all), banned_edge: None, allowed: allowed.map(|v| v.as_slice()), penalty: None };
        let sol = solve_tree(g, &ctx, &r);
        if !sol.feasible() {
            return None;
        }
        total += sol.length;
    }
    Some(total)
}
