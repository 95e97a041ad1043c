//! Per-tree discretization graphs built from parent–children Hanan grids.
//!
//! For every non-leaf node we take the Hanan grid generated by its own
//! region (or its pipeline, for the root) and the regions of its children.
//! The tree graph is the union of those group grids, with collinear edges
//! split wherever another group contributes a vertex, and with everything
//! touching an obstacle removed.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{Instance, NodeRole, WiringTree};
use crate::geometry::{point_on_polyline, Box3, Length, Point3, Segment3};

pub const GRAPH_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("tree '{tree}': admissible set of node '{node}' is empty after discretization")]
    EmptyAdmissibleSet { tree: String, node: String },
    #[error("tree '{tree}': no surviving path between admissible vertices of '{parent}' and '{child}'")]
    DisconnectedRequiredPair { tree: String, parent: String, child: String },
    #[error("tree '{tree}' references unknown pipeline '{pipeline}'")]
    UnknownPipeline { tree: String, pipeline: String },
    #[error("hanan grid requested for an empty group")]
    EmptyGroup,
}

/// A generator of Hanan coordinates.
#[derive(Debug, Clone, Copy)]
pub enum GroupMember<'a> {
    Region(Box3),
    /// Pipeline polyline: extremities and direction changes.
    Pipeline(&'a [Point3]),
}

/// Sorted, deduplicated coordinates per axis.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AxisCoords {
    pub axes: [Vec<i64>; 3],
}

impl AxisCoords {
    pub fn sizes(&self) -> [usize; 3] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len()]
    }
}

pub fn hanan_points(group: &[GroupMember<'_>]) -> Result<AxisCoords, GridError> {
    if group.is_empty() {
        return Err(GridError::EmptyGroup);
    }
    let mut sets: [BTreeSet<i64>; 3] = Default::default();
    let mut add = |p: &Point3| {
        for (k, set) in sets.iter_mut().enumerate() {
            set.insert(p.coord(k));
        }
    };
    for m in group {
        match m {
            GroupMember::Region(b) => {
                add(&b.min);
                add(&b.max);
            }
            GroupMember::Pipeline(pl) => pl.iter().for_each(&mut add),
        }
    }
    let [x, y, z] = sets;
    Ok(AxisCoords { axes: [x.into_iter().collect(), y.into_iter().collect(), z.into_iter().collect()] })
}

/// Cartesian-product grid with edges between axis-consecutive coordinates.
pub fn build_group_grid(coords: &AxisCoords) -> (Vec<Point3>, Vec<(usize, usize)>) {
    let [nx, ny, nz] = coords.sizes();
    let id = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
    let mut vertices = Vec::with_capacity(nx * ny * nz);
    for &x in &coords.axes[0] {
        for &y in &coords.axes[1] {
            for &z in &coords.axes[2] {
                vertices.push(Point3::new(x, y, z));
            }
        }
    }
    let mut edges = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                if i + 1 < nx {
                    edges.push((id(i, j, k), id(i + 1, j, k)));
                }
                if j + 1 < ny {
                    edges.push((id(i, j, k), id(i, j + 1, k)));
                }
                if k + 1 < nz {
                    edges.push((id(i, j, k), id(i, j, k + 1)));
                }
            }
        }
    }
    (vertices, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub tail: u32,
    pub head: u32,
    pub length: Length,
}

/// Discretized network of one tree. Arcs come in antiparallel pairs
/// `2k` / `2k+1`, so the reverse of arc `a` is `a ^ 1` and `a >> 1` names the
/// undirected edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridGraph {
    pub tree_id: String,
    /// Sorted lexicographically.
    pub vertices: Vec<Point3>,
    pub arcs: Vec<Arc>,
    pub out_arcs: Vec<Vec<u32>>,
    pub in_arcs: Vec<Vec<u32>>,
    /// Admissible vertex set per tree node, aligned with `WiringTree::nodes`.
    pub admissible: Vec<Vec<u32>>,
}

impl GridGraph {
    #[inline]
    pub fn reverse(a: u32) -> u32 {
        a ^ 1
    }

    pub fn num_edges(&self) -> usize {
        self.arcs.len() / 2
    }

    pub fn vertex_index(&self, p: &Point3) -> Option<u32> {
        self.vertices.binary_search(p).ok().map(|i| i as u32)
    }

    pub fn arc_segment(&self, a: u32) -> Segment3 {
        let arc = &self.arcs[a as usize];
        Segment3 { a: self.vertices[arc.tail as usize], b: self.vertices[arc.head as usize] }
    }

    pub fn arc_between(&self, u: u32, v: u32) -> Option<u32> {
        self.out_arcs[u as usize].iter().copied().find(|&a| self.arcs[a as usize].head == v)
    }

    /// Rebuild a graph from vertices and undirected edges (pairs of indices).
    fn from_parts(tree_id: String, vertices: Vec<Point3>, edges: &BTreeSet<(u32, u32)>) -> GridGraph {
        let n = vertices.len();
        let mut arcs = Vec::with_capacity(edges.len() * 2);
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        for &(u, v) in edges {
            let length = vertices[u as usize].l1(&vertices[v as usize]);
            for (t, h) in [(u, v), (v, u)] {
                let id = arcs.len() as u32;
                arcs.push(Arc { tail: t, head: h, length });
                out_arcs[t as usize].push(id);
                in_arcs[h as usize].push(id);
            }
        }
        GridGraph { tree_id, vertices, arcs, out_arcs, in_arcs, admissible: vec![] }
    }
}

/// Hanan groups of a tree: one per non-leaf node, in BFS order.
fn tree_groups<'a>(inst: &'a Instance, tree: &'a WiringTree) -> Result<Vec<Vec<GroupMember<'a>>>, GridError> {
    let pipeline = inst
        .pipeline(&tree.pipeline)
        .ok_or_else(|| GridError::UnknownPipeline { tree: tree.id.clone(), pipeline: tree.pipeline.clone() })?;
    let mut groups = Vec::new();
    for id in tree.bfs_order() {
        let node = tree.node(id).expect("bfs yields known nodes");
        if node.children.is_empty() {
            continue;
        }
        let mut group = Vec::with_capacity(node.children.len() + 1);
        group.push(match node.role {
            NodeRole::Root => GroupMember::Pipeline(&pipeline.polyline),
            _ => GroupMember::Region(node.region().expect("non-root has region")),
        });
        for c in &node.children {
            if let Some(child) = tree.node(c).and_then(|n| n.region()) {
                group.push(GroupMember::Region(child));
            }
        }
        groups.push(group);
    }
    Ok(groups)
}

/// Split every edge at union vertices lying strictly inside it.
fn subdivide(vertices: &[Point3], raw: &BTreeSet<(Point3, Point3)>) -> BTreeSet<(u32, u32)> {
    // axis lines keyed by (axis, the two fixed coordinates)
    let mut lines: HashMap<(usize, i64, i64), Vec<i64>> = HashMap::new();
    for p in vertices {
        for k in 0..3 {
            let (o1, o2) = ((k + 1) % 3, (k + 2) % 3);
            lines.entry((k, p.coord(o1), p.coord(o2))).or_default().push(p.coord(k));
        }
    }
    for v in lines.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let index = |p: &Point3| vertices.binary_search(p).expect("edge endpoint is a vertex") as u32;
    let mut out = BTreeSet::new();
    for (a, b) in raw {
        let k = (0..3).find(|&k| a.coord(k) != b.coord(k)).expect("non-degenerate edge");
        let (o1, o2) = ((k + 1) % 3, (k + 2) % 3);
        let line = &lines[&(k, a.coord(o1), a.coord(o2))];
        let (lo, hi) = (a.coord(k).min(b.coord(k)), a.coord(k).max(b.coord(k)));
        let start = line.partition_point(|&c| c < lo);
        let stop = line.partition_point(|&c| c <= hi);
        for w in line[start..stop].windows(2) {
            let (p, q) = (a.with_coord(k, w[0]), a.with_coord(k, w[1]));
            out.insert((index(&p), index(&q)));
        }
    }
    out
}

pub fn assemble_tree_graph(inst: &Instance, tree: &WiringTree) -> Result<GridGraph, GridError> {
    let groups = tree_groups(inst, tree)?;
    let mut vertex_set = BTreeSet::new();
    let mut raw_edges = BTreeSet::new();
    for group in &groups {
        let coords = hanan_points(group)?;
        let (vs, es) = build_group_grid(&coords);
        for &(i, j) in &es {
            raw_edges.insert((vs[i], vs[j]));
        }
        vertex_set.extend(vs);
    }

    // obstacle clipping
    let blocked = |b: &Box3| inst.obstacles.iter().any(|o| o.hits_box(b));
    let vertices: Vec<Point3> = vertex_set.into_iter().filter(|p| !blocked(&Box3::point(*p))).collect();
    let surviving: BTreeSet<(Point3, Point3)> =
        raw_edges.into_iter().filter(|(a, b)| vertices.binary_search(a).is_ok() && vertices.binary_search(b).is_ok()).collect();
    let split = subdivide(&vertices, &surviving);
    let edges: BTreeSet<(u32, u32)> =
        split.into_iter().filter(|&(u, v)| !blocked(&Box3::spanning(vertices[u as usize], vertices[v as usize]))).collect();
    let mut graph = GridGraph::from_parts(tree.id.clone(), vertices, &edges);

    graph.admissible = admissible_sets(inst, tree, &graph)?;
    check_required_pairs(tree, &graph)?;
    Ok(graph)
}

fn admissible_sets(inst: &Instance, tree: &WiringTree, g: &GridGraph) -> Result<Vec<Vec<u32>>, GridError> {
    let pipeline = inst.pipeline(&tree.pipeline).expect("checked in tree_groups");
    let leaf_points: BTreeSet<Point3> = tree
        .leaves()
        .filter_map(|n| match n.role {
            NodeRole::Leaf { point } => Some(point),
            _ => None,
        })
        .collect();
    let mut sets = Vec::with_capacity(tree.nodes.len());
    for node in &tree.nodes {
        let set: Vec<u32> = match &node.role {
            NodeRole::Leaf { point } => g.vertex_index(point).into_iter().collect(),
            // a leaf vertex only ever terminates its own connection
            NodeRole::Root => (0..g.vertices.len() as u32)
                .filter(|&v| {
                    let p = &g.vertices[v as usize];
                    point_on_polyline(p, &pipeline.polyline) && !leaf_points.contains(p)
                })
                .collect(),
            NodeRole::Intermediate { region } => (0..g.vertices.len() as u32)
                .filter(|&v| {
                    let p = &g.vertices[v as usize];
                    region.contains(p) && !leaf_points.contains(p)
                })
                .collect(),
        };
        if set.is_empty() {
            return Err(GridError::EmptyAdmissibleSet { tree: tree.id.clone(), node: node.id.clone() });
        }
        sets.push(set);
    }
    Ok(sets)
}

fn check_required_pairs(tree: &WiringTree, g: &GridGraph) -> Result<(), GridError> {
    for (p, c) in &tree.edges {
        let (pi, ci) = (tree.node_index(p).unwrap(), tree.node_index(c).unwrap());
        let mut seen = vec![false; g.vertices.len()];
        let mut queue: VecDeque<u32> = g.admissible[pi].iter().copied().collect();
        for &v in &queue {
            seen[v as usize] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &a in &g.out_arcs[u as usize] {
                let h = g.arcs[a as usize].head;
                if !seen[h as usize] {
                    seen[h as usize] = true;
                    queue.push_back(h);
                }
            }
        }
        if !g.admissible[ci].iter().any(|&v| seen[v as usize]) {
            return Err(GridError::DisconnectedRequiredPair { tree: tree.id.clone(), parent: p.clone(), child: c.clone() });
        }
    }
    Ok(())
}

/// Graphs for every tree of the forest, in instance order. Trees are kept
/// disjoint: coincident vertices of different trees are not merged.
pub fn assemble_forest(inst: &Instance) -> Result<Vec<GridGraph>, GridError> {
    inst.trees.par_iter().map(|t| assemble_tree_graph(inst, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeGraphDump {
    pub tree_id: String,
    pub vertices: Vec<Point3>,
    /// `[tail, head, length]`
    pub arcs: Vec<[i64; 3]>,
    pub admissible: BTreeMap<String, Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub format: u32,
    pub trees: Vec<TreeGraphDump>,
}

pub fn dump_graphs(inst: &Instance, graphs: &[GridGraph]) -> GraphDump {
    let trees = inst
        .trees
        .iter()
        .zip(graphs)
        .map(|(t, g)| TreeGraphDump {
            tree_id: g.tree_id.clone(),
            vertices: g.vertices.clone(),
            arcs: g.arcs.iter().map(|a| [a.tail as i64, a.head as i64, a.length]).collect(),
            admissible: t.nodes.iter().zip(&g.admissible).map(|(n, s)| (n.id.clone(), s.clone())).collect(),
        })
        .collect();
    GraphDump { format: GRAPH_FORMAT, trees }
}
