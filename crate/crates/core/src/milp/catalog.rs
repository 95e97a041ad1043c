//! Safety conflicts between arcs, found once and materialized on demand.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::diagram::Instance;
use crate::geometry::{l1_segment_distance, l1_segment_polyline_distance, Box3, Length, Segment3};
use crate::gridgen::GridGraph;

use super::{LinearConstraint, RowFamily, Sense, VarIndex};

/// Arc pairs closer than the safety distance, stored per global arc as
/// sorted neighbor lists. Relations are computed on undirected edges and
/// hold for both orientations, so `a` and `a ^ 1` always have the same
/// neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictCatalog {
    pub delta: Length,
    cross_start: Vec<u32>,
    cross: Vec<u32>,
    same_start: Vec<u32>,
    same: Vec<u32>,
    /// Per global arc: closer than the pipeline clearance to a foreign pipeline.
    pub pipeline_forbidden: Vec<bool>,
}

impl ConflictCatalog {
    pub fn num_arcs(&self) -> usize {
        self.pipeline_forbidden.len()
    }

    /// Neighbors of a global arc in other trees.
    pub fn cross_neighbors(&self, g: u32) -> &[u32] {
        &self.cross[self.cross_start[g as usize] as usize..self.cross_start[g as usize + 1] as usize]
    }

    /// Neighbors of a global arc in its own tree (never itself or its reverse).
    pub fn same_neighbors(&self, g: u32) -> &[u32] {
        &self.same[self.same_start[g as usize] as usize..self.same_start[g as usize + 1] as usize]
    }

    pub fn in_conflict(&self, g: u32, h: u32) -> bool {
        self.cross_neighbors(g).binary_search(&h).is_ok() || self.same_neighbors(g).binary_search(&h).is_ok()
    }

    /// All conflicting pairs `(a, b)` with `a < b`, cross-tree and same-tree.
    pub fn arc_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.num_arcs() as u32)
            .flat_map(move |a| self.cross_neighbors(a).iter().chain(self.same_neighbors(a)).filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    pub fn num_pairs(&self) -> usize {
        (self.cross.len() + self.same.len()) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.cross.is_empty() && self.same.is_empty() && !self.pipeline_forbidden.contains(&true)
    }

    /// Aggregated big-M row for arc `g`: its cross-tree neighborhood is
    /// switched off when `g` is installed. `None` for an empty neighborhood.
    pub fn cross_row(&self, index: &VarIndex, big_m: &[i64], g: u32) -> Option<LinearConstraint> {
        let nbrs = self.cross_neighbors(g);
        if nbrs.is_empty() {
            return None;
        }
        let (t, a) = index.split_global_arc(g);
        let m = big_m[t].max(nbrs.len() as i64);
        let mut terms: Vec<(u32, i64)> = nbrs
            .iter()
            .map(|&h| {
                let (u, b) = index.split_global_arc(h);
                (index.install(u, b), 1)
            })
            .collect();
        terms.push((index.install(t, a), m));
        Some(LinearConstraint::new(terms, Sense::Le, m, RowFamily::SafetyArc))
    }

    /// Pairwise row forbidding tree edge `e` on arc `a` together with tree
    /// edge `f` on arc `b`, both in tree `t`. `None` when out of scope.
    pub fn same_tree_row(&self, index: &VarIndex, t: usize, (e, a): (usize, u32), (f, b): (usize, u32)) -> Option<LinearConstraint> {
        let (ga, gb) = (index.global_arc(t, a), index.global_arc(t, b));
        if !index.edges_disjoint(t, e, f) || self.same_neighbors(ga).binary_search(&gb).is_err() {
            return None;
        }
        Some(LinearConstraint::new(vec![(index.flow(t, e, a), 1), (index.flow(t, f, b), 1)], Sense::Le, 1, RowFamily::SafetyArc))
    }

    pub fn pipeline_row(&self, index: &VarIndex, g: u32) -> Option<LinearConstraint> {
        if !self.pipeline_forbidden[g as usize] {
            return None;
        }
        let (t, a) = index.split_global_arc(g);
        Some(LinearConstraint::new(vec![(index.install(t, a), 1)], Sense::Eq, 0, RowFamily::SafetyPipeline))
    }

    /// Row counts if every catalog row were materialized up front:
    /// `(cross big-M rows, same-tree pair rows, pipeline fixings)`.
    pub fn eager_row_counts(&self, index: &VarIndex) -> (usize, usize, usize) {
        let cross = (0..self.num_arcs() as u32).filter(|&g| !self.cross_neighbors(g).is_empty()).count();
        let pipe = self.pipeline_forbidden.iter().filter(|&&b| b).count();
        let mut same = 0;
        for t in 0..index.num_trees() {
            let k = index.tree_edges(t);
            let disjoint = (0..k).flat_map(|e| (e + 1..k).map(move |f| (e, f))).filter(|&(e, f)| index.edges_disjoint(t, e, f)).count();
            let lo = index.global_arc(t, 0);
            let hi = lo + index.tree_arcs(t) as u32;
            let ordered: usize = (lo..hi).map(|g| self.same_neighbors(g).len()).sum();
            same += disjoint * ordered;
        }
        (cross, same, pipe)
    }

    /// Every catalog row, in a fixed order: pipeline fixings, cross-tree
    /// rows by arc, then same-tree pair rows by tree, edge pair and arc pair.
    pub fn all_rows(&self, index: &VarIndex, big_m: &[i64]) -> Vec<LinearConstraint> {
        let mut rows: Vec<LinearConstraint> = (0..self.num_arcs() as u32).filter_map(|g| self.pipeline_row(index, g)).collect();
        rows.extend((0..self.num_arcs() as u32).filter_map(|g| self.cross_row(index, big_m, g)));
        for t in 0..index.num_trees() {
            let k = index.tree_edges(t);
            for e in 0..k {
                for f in e + 1..k {
                    if !index.edges_disjoint(t, e, f) {
                        continue;
                    }
                    for a in 0..index.tree_arcs(t) as u32 {
                        for &gb in self.same_neighbors(index.global_arc(t, a)) {
                            let b = gb - index.global_arc(t, 0);
                            rows.extend(self.same_tree_row(index, t, (e, a), (f, b)));
                        }
                    }
                }
            }
        }
        rows
    }
}

struct EdgeRec {
    tree: u32,
    /// Global id of the forward arc.
    arc: u32,
    seg: Segment3,
}

/// Bucket grid over segment bounding boxes.
struct SpatialHash {
    cell: i64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl SpatialHash {
    fn cells(&self, b: &Box3) -> impl Iterator<Item = [i64; 3]> {
        let c = self.cell;
        let lo = [b.min.x.div_euclid(c), b.min.y.div_euclid(c), b.min.z.div_euclid(c)];
        let hi = [b.max.x.div_euclid(c), b.max.y.div_euclid(c), b.max.z.div_euclid(c)];
        (lo[0]..=hi[0]).flat_map(move |i| (lo[1]..=hi[1]).flat_map(move |j| (lo[2]..=hi[2]).map(move |k| [i, j, k])))
    }

    fn build(cell: i64, recs: &[EdgeRec]) -> SpatialHash {
        let mut h = SpatialHash { cell, buckets: HashMap::new() };
        for (i, r) in recs.iter().enumerate() {
            let cells: Vec<_> = h.cells(&r.seg.bounds()).collect();
            for key in cells {
                h.buckets.entry(key).or_default().push(i as u32);
            }
        }
        h
    }
}

pub fn build_conflict_catalog(inst: &Instance, graphs: &[GridGraph]) -> ConflictCatalog {
    let delta = inst.delta;
    let total: usize = graphs.iter().map(|g| g.arcs.len()).sum();
    let mut recs = Vec::with_capacity(total / 2);
    let mut offset = 0u32;
    for (t, g) in graphs.iter().enumerate() {
        for k in 0..g.num_edges() as u32 {
            recs.push(EdgeRec { tree: t as u32, arc: offset + 2 * k, seg: g.arc_segment(2 * k) });
        }
        offset += g.arcs.len() as u32;
    }

    let mut cross_lists: Vec<Vec<u32>> = vec![Vec::new(); recs.len()];
    let mut same_lists: Vec<Vec<u32>> = vec![Vec::new(); recs.len()];
    if delta > 0 && !recs.is_empty() {
        let hash = SpatialHash::build((2 * delta).max(10), &recs);
        let lists: Vec<(Vec<u32>, Vec<u32>)> = (0..recs.len())
            .into_par_iter()
            .map(|i| {
                let r = &recs[i];
                let mut found: Vec<u32> = hash
                    .cells(&r.seg.bounds().inflate(delta - 1))
                    .filter_map(|c| hash.buckets.get(&c))
                    .flatten()
                    .copied()
                    .filter(|&j| j as usize != i)
                    .collect();
                found.sort_unstable();
                found.dedup();
                let (mut cross, mut same) = (Vec::new(), Vec::new());
                for j in found {
                    let o = &recs[j as usize];
                    if l1_segment_distance(&r.seg, &o.seg) >= delta {
                        continue;
                    }
                    if o.tree == r.tree {
                        same.push(j)
                    } else {
                        cross.push(j)
                    }
                }
                (cross, same)
            })
            .collect();
        for (i, (c, s)) in lists.into_iter().enumerate() {
            cross_lists[i] = c;
            same_lists[i] = s;
        }
    }

    // expand undirected edge relations to both orientations of both arcs
    let expand = |lists: &[Vec<u32>]| -> (Vec<u32>, Vec<u32>) {
        let mut start = Vec::with_capacity(total + 1);
        let mut flat = Vec::new();
        start.push(0u32);
        // recs are in global arc order, so record i covers arcs 2i and 2i+1
        for l in lists {
            let mut arcs: Vec<u32> = l.iter().flat_map(|&j| [recs[j as usize].arc, recs[j as usize].arc + 1]).collect();
            arcs.sort_unstable();
            for _ in 0..2 {
                flat.extend_from_slice(&arcs);
                start.push(flat.len() as u32);
            }
        }
        (start, flat)
    };
    let (cross_start, cross) = expand(&cross_lists);
    let (same_start, same) = expand(&same_lists);

    let clearance = inst.pipeline_clearance();
    let mut pipeline_forbidden = vec![false; total];
    if clearance > 0 {
        for r in &recs {
            let own = &inst.trees[r.tree as usize].pipeline;
            let hit = inst
                .pipelines
                .iter()
                .filter(|p| &p.id != own)
                .any(|p| l1_segment_polyline_distance(&r.seg, &p.polyline).map(|d| d < clearance).unwrap_or(false));
            pipeline_forbidden[r.arc as usize] = hit;
            pipeline_forbidden[r.arc as usize + 1] = hit;
        }
    }

    ConflictCatalog { delta, cross_start, cross, same_start, same, pipeline_forbidden }
}
