//! Binary program over per-tree grid graphs.
//!
//! Three variable families per tree: flow `f[e][a]` for every tree edge `e`
//! and arc `a`, placement `y[s][v]` for every non-leaf node `s` and admissible
//! vertex `v`, and install `x[a]` for every arc. Columns are laid out family
//! by family (all flows, then all placements, then all installs), tree by
//! tree, so the mapping between [`VarRef`] and column is pure arithmetic.

mod catalog;
mod export;

pub use catalog::{build_conflict_catalog, ConflictCatalog};
pub use export::{export_model, write_lp, write_mps, ModelFormat};

use serde::{Deserialize, Serialize};

use crate::diagram::{Instance, NodeRole};
use crate::gridgen::GridGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Flow { tree: u32, edge: u32, arc: u32 },
    Place { tree: u32, node: u32, vertex: u32 },
    Install { tree: u32, arc: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFamily {
    Placement,
    FlowBalance,
    Coupling,
    LeafIn,
    LeafOut,
    Unidir,
    /// One tree edge per undirected grid edge within a tree.
    EdgeExclusive,
    SafetyArc,
    SafetyPipeline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    /// `(column, coefficient)`, sorted by column.
    pub terms: Vec<(u32, i64)>,
    pub sense: Sense,
    pub rhs: i64,
    pub family: RowFamily,
}

impl LinearConstraint {
    pub fn new(mut terms: Vec<(u32, i64)>, sense: Sense, rhs: i64, family: RowFamily) -> Self {
        terms.sort_unstable_by_key(|t| t.0);
        // merge duplicate columns
        let mut merged: Vec<(u32, i64)> = Vec::with_capacity(terms.len());
        for (c, k) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += k,
                _ => merged.push((c, k)),
            }
        }
        merged.retain(|t| t.1 != 0);
        LinearConstraint { terms: merged, sense, rhs, family }
    }

    pub fn activity(&self, values: &[bool]) -> i64 {
        self.terms.iter().filter(|t| values[t.0 as usize]).map(|t| t.1).sum()
    }

    pub fn is_satisfied(&self, values: &[bool]) -> bool {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Eq => lhs == self.rhs,
            Sense::Ge => lhs >= self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TreeBlock {
    flow: u32,
    install: u32,
    /// First column of each node's placement block; `None` for leaves.
    place: Vec<Option<u32>>,
    arcs: u32,
    edges: u32,
    /// Global id of this tree's arc 0.
    arc_offset: u32,
}

/// Bijection between [`VarRef`]s and column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarIndex {
    blocks: Vec<TreeBlock>,
    admissible: Vec<Vec<Vec<u32>>>,
    /// `(parent, child)` node indices per tree edge.
    edge_nodes: Vec<Vec<(u32, u32)>>,
    place_start: u32,
    install_start: u32,
    columns: u32,
    total_arcs: u32,
}

impl VarIndex {
    pub fn new(inst: &Instance, graphs: &[GridGraph]) -> VarIndex {
        let mut blocks = Vec::with_capacity(graphs.len());
        let mut col = 0u32;
        let mut arc_offset = 0u32;
        let mut edge_nodes = Vec::new();
        for (tree, g) in inst.trees.iter().zip(graphs) {
            let arcs = g.arcs.len() as u32;
            let edges = tree.edges.len() as u32;
            blocks.push(TreeBlock { flow: col, install: 0, place: vec![], arcs, edges, arc_offset });
            col += edges * arcs;
            arc_offset += arcs;
            edge_nodes
                .push(tree.edges.iter().map(|(p, c)| (tree.node_index(p).unwrap() as u32, tree.node_index(c).unwrap() as u32)).collect());
        }
        let place_start = col;
        for ((tree, g), b) in inst.trees.iter().zip(graphs).zip(&mut blocks) {
            for (node, set) in tree.nodes.iter().zip(&g.admissible) {
                if node.is_leaf() {
                    b.place.push(None);
                } else {
                    b.place.push(Some(col));
                    col += set.len() as u32;
                }
            }
        }
        let install_start = col;
        for b in &mut blocks {
            b.install = col;
            col += b.arcs;
        }
        VarIndex {
            blocks,
            admissible: graphs.iter().map(|g| g.admissible.clone()).collect(),
            edge_nodes,
            place_start,
            install_start,
            columns: col,
            total_arcs: arc_offset,
        }
    }

    pub fn num_columns(&self) -> usize {
        self.columns as usize
    }

    pub fn num_trees(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_arcs(&self) -> usize {
        self.total_arcs as usize
    }

    pub fn tree_arcs(&self, tree: usize) -> usize {
        self.blocks[tree].arcs as usize
    }

    pub fn tree_edges(&self, tree: usize) -> usize {
        self.blocks[tree].edges as usize
    }

    pub fn edge_nodes(&self, tree: usize, edge: usize) -> (usize, usize) {
        let (p, c) = self.edge_nodes[tree][edge];
        (p as usize, c as usize)
    }

    /// Whether two tree edges share no tree node.
    pub fn edges_disjoint(&self, tree: usize, e: usize, f: usize) -> bool {
        let (a, b) = self.edge_nodes[tree][e];
        let (c, d) = self.edge_nodes[tree][f];
        a != c && a != d && b != c && b != d
    }

    pub fn global_arc(&self, tree: usize, arc: u32) -> u32 {
        self.blocks[tree].arc_offset + arc
    }

    pub fn split_global_arc(&self, g: u32) -> (usize, u32) {
        let t = self.blocks.partition_point(|b| b.arc_offset <= g) - 1;
        (t, g - self.blocks[t].arc_offset)
    }

    pub fn flow(&self, tree: usize, edge: usize, arc: u32) -> u32 {
        let b = &self.blocks[tree];
        b.flow + edge as u32 * b.arcs + arc
    }

    pub fn install(&self, tree: usize, arc: u32) -> u32 {
        self.blocks[tree].install + arc
    }

    /// Column of `y[node][vertex]`, if the node is non-leaf and the vertex admissible.
    pub fn place(&self, tree: usize, node: usize, vertex: u32) -> Option<u32> {
        let start = self.blocks[tree].place[node]?;
        let slot = self.admissible[tree][node].binary_search(&vertex).ok()?;
        Some(start + slot as u32)
    }

    pub fn column(&self, v: VarRef) -> Option<u32> {
        match v {
            VarRef::Flow { tree, edge, arc } => {
                let b = self.blocks.get(tree as usize)?;
                (edge < b.edges && arc < b.arcs).then(|| self.flow(tree as usize, edge as usize, arc))
            }
            VarRef::Place { tree, node, vertex } => {
                self.blocks.get(tree as usize)?.place.get(node as usize)?;
                self.place(tree as usize, node as usize, vertex)
            }
            VarRef::Install { tree, arc } => {
                let b = self.blocks.get(tree as usize)?;
                (arc < b.arcs).then(|| self.install(tree as usize, arc))
            }
        }
    }

    pub fn decode(&self, col: u32) -> Option<VarRef> {
        if col >= self.columns {
            return None;
        }
        if col < self.place_start {
            let t = self.blocks.partition_point(|b| b.flow <= col) - 1;
            let b = &self.blocks[t];
            let off = col - b.flow;
            return Some(VarRef::Flow { tree: t as u32, edge: off / b.arcs, arc: off % b.arcs });
        }
        if col < self.install_start {
            for (t, b) in self.blocks.iter().enumerate() {
                for (n, start) in b.place.iter().enumerate() {
                    let Some(start) = *start else { continue };
                    let len = self.admissible[t][n].len() as u32;
                    if (start..start + len).contains(&col) {
                        let vertex = self.admissible[t][n][(col - start) as usize];
                        return Some(VarRef::Place { tree: t as u32, node: n as u32, vertex });
                    }
                }
            }
            unreachable!("placement columns are contiguous");
        }
        let t = self.blocks.partition_point(|b| b.install <= col) - 1;
        Some(VarRef::Install { tree: t as u32, arc: col - self.blocks[t].install })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MilpModel {
    pub index: VarIndex,
    pub constraints: Vec<LinearConstraint>,
    /// `(column, cost)` with cost the arc length on install columns.
    pub objective: Vec<(u32, i64)>,
    /// Big-M per tree: the arc count of the tree's graph.
    pub big_m: Vec<i64>,
}

impl MilpModel {
    pub fn num_columns(&self) -> usize {
        self.index.num_columns()
    }

    pub fn objective_value(&self, values: &[bool]) -> i64 {
        self.objective.iter().filter(|t| values[t.0 as usize]).map(|t| t.1).sum()
    }

    pub fn family_counts(&self) -> std::collections::BTreeMap<RowFamily, usize> {
        let mut m = std::collections::BTreeMap::new();
        for c in &self.constraints {
            *m.entry(c.family).or_insert(0) += 1;
        }
        m
    }

    pub fn violated_rows(&self, values: &[bool]) -> Vec<usize> {
        (0..self.constraints.len()).filter(|&i| !self.constraints[i].is_satisfied(values)).collect()
    }
}

/// Closed-form column and row counts of the core model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelSize {
    pub flow: usize,
    pub place: usize,
    pub install: usize,
    pub rows: usize,
}

impl ModelSize {
    pub fn columns(&self) -> usize {
        self.flow + self.place + self.install
    }
}

pub fn expected_size(inst: &Instance, graphs: &[GridGraph]) -> ModelSize {
    let mut s = ModelSize::default();
    for (tree, g) in inst.trees.iter().zip(graphs) {
        let (e, a, v) = (tree.edges.len(), g.arcs.len(), g.vertices.len());
        let nonleaf: Vec<usize> = (0..tree.nodes.len()).filter(|&i| !tree.nodes[i].is_leaf()).collect();
        let leaves = tree.nodes.len() - nonleaf.len();
        s.flow += e * a;
        s.install += a;
        s.place += nonleaf.iter().map(|&i| g.admissible[i].len()).sum::<usize>();
        s.rows += nonleaf.len() + e * v + e * a + 2 * leaves + e * a / 2;
        if e >= 2 {
            s.rows += a / 2;
        }
    }
    s
}

/// Core rows: placement, flow balance, coupling, leaf degree, antiparallel
/// exclusion and per-tree corridor exclusivity.
pub fn build_core_model(inst: &Instance, graphs: &[GridGraph]) -> MilpModel {
    let index = VarIndex::new(inst, graphs);
    let mut rows = Vec::new();
    let mut objective = Vec::with_capacity(index.total_arcs());
    for (t, (tree, g)) in inst.trees.iter().zip(graphs).enumerate() {
        for (s, node) in tree.nodes.iter().enumerate() {
            if node.is_leaf() {
                continue;
            }
            let terms = g.admissible[s].iter().map(|&v| (index.place(t, s, v).unwrap(), 1)).collect();
            rows.push(LinearConstraint::new(terms, Sense::Eq, 1, RowFamily::Placement));
        }
        for e in 0..tree.edges.len() {
            let (s, c) = index.edge_nodes(t, e);
            let leaf_vertex = match tree.nodes[c].role {
                NodeRole::Leaf { .. } => Some(g.admissible[c][0]),
                _ => None,
            };
            for v in 0..g.vertices.len() as u32 {
                let mut terms: Vec<(u32, i64)> = Vec::new();
                terms.extend(g.out_arcs[v as usize].iter().map(|&a| (index.flow(t, e, a), 1)));
                terms.extend(g.in_arcs[v as usize].iter().map(|&a| (index.flow(t, e, a), -1)));
                if let Some(col) = index.place(t, s, v) {
                    terms.push((col, -1));
                }
                if let Some(col) = index.place(t, c, v) {
                    terms.push((col, 1));
                }
                let rhs = if leaf_vertex == Some(v) { -1 } else { 0 };
                rows.push(LinearConstraint::new(terms, Sense::Eq, rhs, RowFamily::FlowBalance));
            }
            for a in 0..g.arcs.len() as u32 {
                rows.push(LinearConstraint::new(
                    vec![(index.flow(t, e, a), 1), (index.install(t, a), -1)],
                    Sense::Le,
                    0,
                    RowFamily::Coupling,
                ));
            }
            for k in 0..g.num_edges() as u32 {
                rows.push(LinearConstraint::new(
                    vec![(index.flow(t, e, 2 * k), 1), (index.flow(t, e, 2 * k + 1), 1)],
                    Sense::Le,
                    1,
                    RowFamily::Unidir,
                ));
            }
        }
        for (l, node) in tree.nodes.iter().enumerate() {
            if !node.is_leaf() {
                continue;
            }
            let v = g.admissible[l][0] as usize;
            let inn = g.in_arcs[v].iter().map(|&a| (index.install(t, a), 1)).collect();
            rows.push(LinearConstraint::new(inn, Sense::Eq, 1, RowFamily::LeafIn));
            let out = g.out_arcs[v].iter().map(|&a| (index.install(t, a), 1)).collect();
            rows.push(LinearConstraint::new(out, Sense::Eq, 0, RowFamily::LeafOut));
        }
        if tree.edges.len() >= 2 {
            for k in 0..g.num_edges() as u32 {
                let terms = (0..tree.edges.len()).flat_map(|e| [(index.flow(t, e, 2 * k), 1), (index.flow(t, e, 2 * k + 1), 1)]).collect();
                rows.push(LinearConstraint::new(terms, Sense::Le, 1, RowFamily::EdgeExclusive));
            }
        }
        objective.extend(g.arcs.iter().enumerate().map(|(a, arc)| (index.install(t, a as u32), arc.length)));
    }
    let big_m = graphs.iter().map(|g| g.arcs.len() as i64).collect();
    MilpModel { index, constraints: rows, objective, big_m }
}

/// Assemble a full 0/1 vector from placements and per-edge arc lists, with
/// installs set to the union of used arcs.
pub fn assignment_from_paths(index: &VarIndex, placements: &[Vec<Option<u32>>], edge_arcs: &[Vec<Vec<u32>>]) -> Vec<bool> {
    let mut values = vec![false; index.num_columns()];
    for (t, nodes) in placements.iter().enumerate() {
        for (s, v) in nodes.iter().enumerate() {
            if let Some(col) = v.and_then(|v| index.place(t, s, v)) {
                values[col as usize] = true;
            }
        }
    }
    for (t, edges) in edge_arcs.iter().enumerate() {
        for (e, arcs) in edges.iter().enumerate() {
            for &a in arcs {
                values[index.flow(t, e, a) as usize] = true;
                values[index.install(t, a) as usize] = true;
            }
        }
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{InstanceMeta, Pipeline, TreeBuilder, INSTANCE_FORMAT};
    use crate::geometry::{Box3, Point3};
    use crate::gridgen::assemble_forest;

    pub(crate) fn two_vertex_instance() -> Instance {
        // the leaf sits on the pipeline's far end, so the only anchor is (0,0,0)
        let tree = TreeBuilder::new("T", "c", "r").leaf("r", "l", Point3::new(5, 0, 0)).build();
        Instance {
            format: INSTANCE_FORMAT,
            region: Box3::new(Point3::new(-10, -10, -10), Point3::new(10, 10, 10)).unwrap(),
            pipelines: vec![Pipeline { id: "c".into(), polyline: vec![Point3::new(0, 0, 0), Point3::new(5, 0, 0)] }],
            trees: vec![tree],
            obstacles: vec![],
            delta: 1,
            pipeline_clearance: None,
            meta: InstanceMeta::default(),
        }
    }

    fn three_node_instance() -> Instance {
        let tree = TreeBuilder::new("T", "c", "r")
            .intermediate("r", "v", Box3::new(Point3::new(2, 0, 0), Point3::new(4, 2, 2)).unwrap())
            .leaf("v", "l", Point3::new(8, 1, 1))
            .build();
        Instance { trees: vec![tree], ..two_vertex_instance() }
    }

    #[test]
    fn trivial_path_model_counts() {
        let inst = two_vertex_instance();
        let graphs = assemble_forest(&inst).unwrap();
        assert_eq!((graphs[0].vertices.len(), graphs[0].num_edges()), (2, 1));
        let m = build_core_model(&inst, &graphs);
        let size = expected_size(&inst, &graphs);
        assert_eq!(m.num_columns(), size.columns());
        assert_eq!(m.constraints.len(), size.rows);
        assert_eq!((size.flow, size.install, size.place), (2, 2, 1));
    }

    #[test]
    fn decode_is_inverse_of_column() {
        let inst = three_node_instance();
        let graphs = assemble_forest(&inst).unwrap();
        let idx = VarIndex::new(&inst, &graphs);
        for col in 0..idx.num_columns() as u32 {
            let v = idx.decode(col).unwrap();
            assert_eq!(idx.column(v), Some(col), "{v:?}");
        }
        assert_eq!(idx.decode(idx.num_columns() as u32), None);
    }

    #[test]
    fn counting_identity_on_small_tree() {
        let inst = three_node_instance();
        let graphs = assemble_forest(&inst).unwrap();
        let m = build_core_model(&inst, &graphs);
        let size = expected_size(&inst, &graphs);
        assert_eq!((m.num_columns(), m.constraints.len()), (size.columns(), size.rows));
        let fam = m.family_counts();
        assert_eq!(fam[&RowFamily::Placement], 2);
        assert_eq!(fam[&RowFamily::LeafIn], 1);
        assert_eq!(fam[&RowFamily::EdgeExclusive], graphs[0].num_edges());
        assert!(m.objective.iter().all(|t| t.1 > 0));
        assert!(m.big_m[0] >= graphs[0].arcs.len() as i64);
    }

    #[test]
    fn shortest_routes_satisfy_core_rows() {
        let inst = three_node_instance();
        let graphs = assemble_forest(&inst).unwrap();
        let g = &graphs[0];
        let m = build_core_model(&inst, &graphs);
        let at = |p: [i64; 3]| g.vertex_index(&p.into()).unwrap();
        let walk = |pts: &[[i64; 3]]| -> Vec<u32> { pts.windows(2).map(|w| g.arc_between(at(w[0]), at(w[1])).unwrap()).collect() };
        // root (0,0,0) -> v (2,0,0); v -> (4,0,0) -> (4,1,0) -> (4,1,1) -> (8,1,1)
        let p1 = walk(&[[0, 0, 0], [2, 0, 0]]);
        let p2 = walk(&[[2, 0, 0], [4, 0, 0], [4, 1, 0], [4, 1, 1], [8, 1, 1]]);
        let place = vec![vec![Some(at([0, 0, 0])), Some(at([2, 0, 0])), None]];
        let values = assignment_from_paths(&m.index, &place, &[vec![p1, p2]]);
        assert!(m.violated_rows(&values).is_empty(), "{:?}", m.violated_rows(&values));
        assert_eq!(m.objective_value(&values), 2 + 2 + 1 + 1 + 4);

        // dropping one arc breaks flow balance
        let mut broken = values.clone();
        let a = g.arc_between(at([4, 0, 0]), at([4, 1, 0])).unwrap();
        broken[m.index.flow(0, 1, a) as usize] = false;
        assert!(!m.violated_rows(&broken).is_empty());
    }

    #[test]
    fn constraint_merges_duplicates() {
        let c = LinearConstraint::new(vec![(3, 1), (1, 2), (3, -1)], Sense::Le, 1, RowFamily::Coupling);
        assert_eq!(c.terms, vec![(1, 2)]);
    }
}
