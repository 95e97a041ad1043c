//! Safety-free relaxation of one tree: choose placements and per-edge
//! shortest paths minimizing total length, under arc bans and optional
//! placement restrictions. Solved exactly by a bottom-up DP in which each
//! tree edge is one backward multi-source Dijkstra seeded with the child's
//! subtree cost.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::diagram::WiringTree;
use crate::gridgen::GridGraph;

pub(crate) const INF: i64 = i64::MAX / 4;
const NONE: u32 = u32::MAX;
/// Lengths are scaled by this factor so a secondary tie-break penalty can
/// ride along in the low bits without ever changing the length order.
pub(crate) const SCALE: i64 = 1 << 24;
pub(crate) const MAX_PENALTY: i64 = 255;

/// Static structure of a tree needed by the DP.
#[derive(Debug, Clone)]
pub(crate) struct TreeCtx {
    /// Non-leaf nodes children-before-parents.
    pub post_order: Vec<usize>,
    /// Outgoing tree edges (edge index, child node) per node.
    pub child_edges: Vec<Vec<(usize, usize)>>,
    pub root: usize,
    pub leaf_vertex: Vec<bool>,
    pub is_leaf: Vec<bool>,
    pub edges: Vec<(usize, usize)>,
}

impl TreeCtx {
    pub fn new(tree: &WiringTree, g: &GridGraph) -> TreeCtx {
        let n = tree.nodes.len();
        let edges: Vec<(usize, usize)> =
            tree.edges.iter().map(|(p, c)| (tree.node_index(p).unwrap(), tree.node_index(c).unwrap())).collect();
        let mut child_edges = vec![Vec::new(); n];
        for (e, &(p, c)) in edges.iter().enumerate() {
            child_edges[p].push((e, c));
        }
        let is_leaf: Vec<bool> = tree.nodes.iter().map(|n| n.is_leaf()).collect();
        let mut leaf_vertex = vec![false; g.vertices.len()];
        for (i, &leaf) in is_leaf.iter().enumerate() {
            if leaf {
                leaf_vertex[g.admissible[i][0] as usize] = true;
            }
        }
        let mut post_order: Vec<usize> = tree.bfs_order().iter().map(|id| tree.node_index(id).unwrap()).filter(|&i| !is_leaf[i]).collect();
        post_order.reverse();
        TreeCtx { post_order, child_edges, root: tree.node_index(&tree.root).unwrap(), leaf_vertex, is_leaf, edges }
    }
}

/// What a relaxation may not use.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Restrictions<'a> {
    /// Undirected edges closed to every tree edge.
    pub banned_all: Option<&'a [bool]>,
    /// Sorted undirected edges closed to a single tree edge.
    pub banned_edge: Option<&'a [Vec<u32>]>,
    /// Allowed placement vertices per node; `None` = whole admissible set.
    pub allowed: Option<&'a [Option<Vec<u32>>]>,
    /// Tie-break penalty per arc in `0..=MAX_PENALTY`.
    pub penalty: Option<&'a [i64]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TreeSol {
    /// Total length; `INF` when no placement admits all paths.
    pub length: i64,
    /// Vertex per node (`NONE` when infeasible).
    pub placement: Vec<u32>,
    /// Arc sequence per tree edge.
    pub paths: Vec<Vec<u32>>,
}

impl TreeSol {
    pub fn feasible(&self) -> bool {
        self.length < INF
    }
}

/// Scratch buffers reused across Dijkstra runs on one graph.
struct Scratch {
    dist: Vec<i64>,
    next: Vec<u32>,
    blocked: Vec<bool>,
    target: Vec<bool>,
}

/// Backward search from the child's candidate vertices; leaves `dist` and
/// `next` (arc toward the child) for every vertex it settles.
#[allow(clippy::too_many_arguments)]
fn backward_search(g: &GridGraph, ctx: &TreeCtx, seeds: &[(u32, i64)], targets: &[u32], penalty: Option<&[i64]>, s: &mut Scratch) {
    s.dist.iter_mut().for_each(|d| *d = INF);
    s.next.iter_mut().for_each(|n| *n = NONE);
    let mut heap = BinaryHeap::new();
    for &(v, c) in seeds {
        if c < s.dist[v as usize] {
            s.dist[v as usize] = c;
            heap.push(Reverse((c, v)));
        }
    }
    for &t in targets {
        s.target[t as usize] = true;
    }
    let mut remaining = targets.len();
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > s.dist[u as usize] {
            continue;
        }
        if s.target[u as usize] {
            s.target[u as usize] = false;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        for &a in &g.in_arcs[u as usize] {
            if s.blocked[(a >> 1) as usize] {
                continue;
            }
            let arc = &g.arcs[a as usize];
            let t = arc.tail as usize;
            // a leaf vertex only ever ends its own connection
            if ctx.leaf_vertex[t] {
                continue;
            }
            let nd = d + arc.length * SCALE + penalty.map_or(0, |p| p[a as usize]);
            if nd < s.dist[t] {
                s.dist[t] = nd;
                s.next[t] = a;
                heap.push(Reverse((nd, t as u32)));
            }
        }
    }
    for &t in targets {
        s.target[t as usize] = false;
    }
}

fn candidates<'a>(g: &'a GridGraph, r: &'a Restrictions<'_>, node: usize) -> &'a [u32] {
    match r.allowed.and_then(|a| a[node].as_ref()) {
        Some(list) => list,
        None => &g.admissible[node],
    }
}

pub(crate) fn solve_tree(g: &GridGraph, ctx: &TreeCtx, r: &Restrictions<'_>) -> TreeSol {
    let nv = g.vertices.len();
    let nn = ctx.is_leaf.len();
    let mut s = Scratch { dist: vec![INF; nv], next: vec![NONE; nv], blocked: vec![false; g.num_edges()], target: vec![false; nv] };
    if let Some(all) = r.banned_all {
        s.blocked.copy_from_slice(all);
    }
    let infeasible = || TreeSol { length: INF, placement: vec![NONE; nn], paths: vec![Vec::new(); ctx.edges.len()] };

    // cost[node] aligned with candidates(node)
    let mut cost: Vec<Vec<i64>> = vec![Vec::new(); nn];
    for (i, &leaf) in ctx.is_leaf.iter().enumerate() {
        if leaf {
            cost[i] = vec![0; candidates(g, r, i).len()];
        }
    }
    let mut next: Vec<Vec<u32>> = vec![Vec::new(); ctx.edges.len()];
    for &node in &ctx.post_order {
        let mine = candidates(g, r, node);
        let mut acc = vec![0i64; mine.len()];
        for &(e, child) in &ctx.child_edges[node] {
            let seeds: Vec<(u32, i64)> =
                candidates(g, r, child).iter().zip(&cost[child]).filter(|(_, &c)| c < INF).map(|(&v, &c)| (v, c)).collect();
            if seeds.is_empty() {
                return infeasible();
            }
            let edge_bans = r.banned_edge.map(|b| b[e].as_slice()).unwrap_or(&[]);
            for &k in edge_bans {
                s.blocked[k as usize] = true;
            }
            backward_search(g, ctx, &seeds, mine, r.penalty, &mut s);
            for &k in edge_bans {
                s.blocked[k as usize] = r.banned_all.is_some_and(|b| b[k as usize]);
            }
            for (slot, &v) in mine.iter().enumerate() {
                let d = s.dist[v as usize];
                acc[slot] = if d >= INF || acc[slot] >= INF { INF } else { acc[slot] + d };
            }
            next[e] = s.next.clone();
        }
        cost[node] = acc;
    }

    let roots = candidates(g, r, ctx.root);
    let mut best: Option<(i64, usize)> = None;
    for (slot, &c) in cost[ctx.root].iter().enumerate() {
        if c < INF && best.is_none_or(|(b, _)| c < b) {
            best = Some((c, slot));
        }
    }
    let Some((_, slot)) = best else { return infeasible() };

    let mut placement = vec![NONE; nn];
    let mut paths = vec![Vec::new(); ctx.edges.len()];
    placement[ctx.root] = roots[slot];
    let mut length = 0;
    let mut stack = vec![ctx.root];
    while let Some(node) = stack.pop() {
        for &(e, child) in &ctx.child_edges[node] {
            let mut u = placement[node];
            while next[e][u as usize] != NONE {
                let a = next[e][u as usize];
                paths[e].push(a);
                length += g.arcs[a as usize].length;
                u = g.arcs[a as usize].head;
            }
            placement[child] = u;
            stack.push(child);
        }
    }
    TreeSol { length, placement, paths }
}
