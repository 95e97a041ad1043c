//! Decoded solutions and the on-disk solution format.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{FormatError, Instance, NodeRole};
use crate::geometry::{Length, Point3};
use crate::gridgen::GridGraph;
use crate::milp::{MilpModel, VarRef};

use super::{SolveReport, SolveStatus};

pub const SOLUTION_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePath {
    pub tree: String,
    pub parent: String,
    pub child: String,
    pub vertices: Vec<Point3>,
}

impl EdgePath {
    pub fn length(&self) -> Length {
        self.vertices.windows(2).map(|w| w[0].l1(&w[1])).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    /// Location of every node, keyed by node id.
    pub placements: BTreeMap<String, Point3>,
    /// One path per tree edge, in instance order.
    pub paths: Vec<EdgePath>,
    /// Installed arcs per tree as `[tail, head]`, sorted.
    pub installed: BTreeMap<String, Vec<[Point3; 2]>>,
    pub total_length: Length,
}

impl Layout {
    /// Build from per-tree placements (vertex per node) and arc paths.
    pub(crate) fn from_vertices(inst: &Instance, graphs: &[GridGraph], placement: &[&[u32]], paths: &[&[Vec<u32>]]) -> Layout {
        let mut placements = BTreeMap::new();
        let mut edge_paths = Vec::new();
        let mut installed = BTreeMap::new();
        let mut total = 0;
        for (t, (tree, g)) in inst.trees.iter().zip(graphs).enumerate() {
            for (node, &v) in tree.nodes.iter().zip(placement[t]) {
                placements.insert(node.id.clone(), g.vertices[v as usize]);
            }
            let mut arcs = BTreeSet::new();
            for (e, (p, c)) in tree.edges.iter().enumerate() {
                let start = g.vertices[placement[t][tree.node_index(p).unwrap()] as usize];
                let mut vertices = vec![start];
                for &a in &paths[t][e] {
                    vertices.push(g.vertices[g.arcs[a as usize].head as usize]);
                    arcs.insert(a);
                }
                edge_paths.push(EdgePath { tree: tree.id.clone(), parent: p.clone(), child: c.clone(), vertices });
            }
            total += arcs.iter().map(|&a| g.arcs[a as usize].length).sum::<Length>();
            let mut list: Vec<[Point3; 2]> = arcs
                .iter()
                .map(|&a| {
                    let arc = g.arcs[a as usize];
                    [g.vertices[arc.tail as usize], g.vertices[arc.head as usize]]
                })
                .collect();
            list.sort();
            installed.insert(tree.id.clone(), list);
        }
        Layout { placements, paths: edge_paths, installed, total_length: total }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("value vector has {got} entries, model has {want} columns")]
    Length { got: usize, want: usize },
    #[error("node '{0}' has no placement")]
    MissingPlacement(String),
    #[error("node '{0}' has several placements")]
    AmbiguousPlacement(String),
    #[error("tree '{tree}': no flow path from '{parent}' to '{child}'")]
    NoPath { tree: String, parent: String, child: String },
}

/// Decode a 0/1 assignment of the core model. Each connection is recovered
/// as a fewest-arc route through its flow arcs; flow on arcs off that route
/// (stray cycles) is dropped and reported in the returned warnings.
pub fn extract_layout(
    inst: &Instance,
    graphs: &[GridGraph],
    model: &MilpModel,
    values: &[bool],
) -> Result<(Layout, Vec<String>), ExtractError> {
    let idx = &model.index;
    if values.len() != idx.num_columns() {
        return Err(ExtractError::Length { got: values.len(), want: idx.num_columns() });
    }
    let mut placement: Vec<Vec<Option<u32>>> = inst.trees.iter().map(|t| vec![None; t.nodes.len()]).collect();
    for (t, tree) in inst.trees.iter().enumerate() {
        for (s, node) in tree.nodes.iter().enumerate() {
            if let NodeRole::Leaf { .. } = node.role {
                placement[t][s] = Some(graphs[t].admissible[s][0]);
            }
        }
    }
    let mut flows: Vec<Vec<Vec<u32>>> = inst.trees.iter().map(|t| vec![Vec::new(); t.edges.len()]).collect();
    for (col, &on) in values.iter().enumerate() {
        if !on {
            continue;
        }
        match idx.decode(col as u32).expect("column in range") {
            VarRef::Place { tree, node, vertex } => {
                let slot = &mut placement[tree as usize][node as usize];
                if slot.is_some() {
                    let id = inst.trees[tree as usize].nodes[node as usize].id.clone();
                    return Err(ExtractError::AmbiguousPlacement(id));
                }
                *slot = Some(vertex);
            }
            VarRef::Flow { tree, edge, arc } => flows[tree as usize][edge as usize].push(arc),
            VarRef::Install { .. } => {}
        }
    }

    let mut warnings = Vec::new();
    let mut fixed: Vec<Vec<u32>> = Vec::new();
    let mut paths: Vec<Vec<Vec<u32>>> = Vec::new();
    for (t, tree) in inst.trees.iter().enumerate() {
        let g = &graphs[t];
        let mut pl = Vec::with_capacity(tree.nodes.len());
        for (s, p) in placement[t].iter().enumerate() {
            pl.push(p.ok_or_else(|| ExtractError::MissingPlacement(tree.nodes[s].id.clone()))?);
        }
        let mut tree_paths = Vec::new();
        for (e, (p, c)) in tree.edges.iter().enumerate() {
            let (from, to) = (pl[tree.node_index(p).unwrap()], pl[tree.node_index(c).unwrap()]);
            let arcs: BTreeSet<u32> = flows[t][e].iter().copied().collect();
            let path = bfs_path(g, &arcs, from, to).ok_or_else(|| ExtractError::NoPath {
                tree: tree.id.clone(),
                parent: p.clone(),
                child: c.clone(),
            })?;
            if path.len() < arcs.len() {
                warnings.push(format!("tree '{}' edge {p}->{c}: dropped {} flow arcs off the path", tree.id, arcs.len() - path.len()));
            }
            tree_paths.push(path);
        }
        fixed.push(pl);
        paths.push(tree_paths);
    }
    let pl_refs: Vec<&[u32]> = fixed.iter().map(|v| v.as_slice()).collect();
    let path_refs: Vec<&[Vec<u32>]> = paths.iter().map(|v| v.as_slice()).collect();
    Ok((Layout::from_vertices(inst, graphs, &pl_refs, &path_refs), warnings))
}

fn bfs_path(g: &GridGraph, arcs: &BTreeSet<u32>, from: u32, to: u32) -> Option<Vec<u32>> {
    let mut via: BTreeMap<u32, u32> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = Vec::new();
            let mut v = to;
            while v != from {
                let a = via[&v];
                path.push(a);
                v = g.arcs[a as usize].tail;
            }
            path.reverse();
            return Some(path);
        }
        for &a in &g.out_arcs[u as usize] {
            let h = g.arcs[a as usize].head;
            if arcs.contains(&a) && seen.insert(h) {
                via.insert(h, a);
                queue.push_back(h);
            }
        }
    }
    None
}

/// Solution file: layout (when one exists) plus the solve report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub format: u32,
    pub status: SolveStatus,
    pub objective: Option<Length>,
    pub placements: BTreeMap<String, Point3>,
    pub paths: Vec<EdgePath>,
    pub installed: BTreeMap<String, Vec<[Point3; 2]>>,
    pub report: SolveReport,
}

impl Solution {
    pub fn new(layout: Option<&Layout>, report: &SolveReport) -> Solution {
        Solution {
            format: SOLUTION_FORMAT,
            status: report.status,
            objective: layout.map(|l| l.total_length),
            placements: layout.map(|l| l.placements.clone()).unwrap_or_default(),
            paths: layout.map(|l| l.paths.clone()).unwrap_or_default(),
            installed: layout.map(|l| l.installed.clone()).unwrap_or_default(),
            report: report.clone(),
        }
    }

    pub fn layout(&self) -> Option<Layout> {
        let total_length = self.objective?;
        Some(Layout { placements: self.placements.clone(), paths: self.paths.clone(), installed: self.installed.clone(), total_length })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes") + "\n"
    }

    pub fn from_json_str(s: &str) -> Result<Solution, FormatError> {
        let sol: Solution = serde_json::from_str(s)?;
        if sol.format != SOLUTION_FORMAT {
            return Err(FormatError::Version(sol.format));
        }
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{InstanceMeta, Pipeline, TreeBuilder, INSTANCE_FORMAT};
    use crate::geometry::Box3;
    use crate::gridgen::assemble_forest;
    use crate::milp::{assignment_from_paths, build_core_model};

    fn pt(x: i64, y: i64, z: i64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn instance() -> Instance {
        let tree = TreeBuilder::new("T", "c", "r")
            .intermediate("r", "v", Box3::new(pt(4, 0, 0), pt(6, 4, 2)).unwrap())
            .leaf("v", "l", pt(10, 2, 0))
            .build();
        Instance {
            format: INSTANCE_FORMAT,
            region: Box3::new(pt(-20, -20, -20), pt(20, 20, 20)).unwrap(),
            pipelines: vec![Pipeline { id: "c".into(), polyline: vec![pt(0, 0, 0), pt(0, 4, 0)] }],
            trees: vec![tree],
            obstacles: vec![],
            delta: 1,
            pipeline_clearance: None,
            meta: InstanceMeta::default(),
        }
    }

    fn walk(g: &GridGraph, pts: &[Point3]) -> Vec<u32> {
        pts.windows(2).map(|w| g.arc_between(g.vertex_index(&w[0]).unwrap(), g.vertex_index(&w[1]).unwrap()).unwrap()).collect()
    }

    #[test]
    fn decodes_forced_paths() {
        let inst = instance();
        let graphs = assemble_forest(&inst).unwrap();
        let g = &graphs[0];
        let m = build_core_model(&inst, &graphs);
        let p1 = walk(g, &[pt(0, 0, 0), pt(4, 0, 0)]);
        let p2 = walk(g, &[pt(4, 0, 0), pt(6, 0, 0), pt(6, 2, 0), pt(10, 2, 0)]);
        let v = |p| g.vertex_index(&p);
        let values = assignment_from_paths(&m.index, &[vec![v(pt(0, 0, 0)), v(pt(4, 0, 0)), None]], &[vec![p1, p2]]);
        let (layout, warnings) = extract_layout(&inst, &graphs, &m, &values).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(layout.total_length, 12);
        assert_eq!(layout.paths[1].vertices, vec![pt(4, 0, 0), pt(6, 0, 0), pt(6, 2, 0), pt(10, 2, 0)]);
        assert_eq!(layout.placements["l"], pt(10, 2, 0));
        // shared parent placement: the second path starts where the first ends
        assert_eq!(layout.paths[0].vertices.last(), layout.paths[1].vertices.first());
    }

    #[test]
    fn stray_flow_cycle_is_dropped() {
        let inst = instance();
        let graphs = assemble_forest(&inst).unwrap();
        let g = &graphs[0];
        let m = build_core_model(&inst, &graphs);
        let p1 = walk(g, &[pt(0, 0, 0), pt(4, 0, 0)]);
        let mut p2 = walk(g, &[pt(4, 0, 0), pt(6, 0, 0), pt(6, 2, 0), pt(10, 2, 0)]);
        // a 4-arc cycle away from the route
        p2.extend(walk(g, &[pt(4, 4, 0), pt(6, 4, 0), pt(6, 4, 2), pt(4, 4, 2), pt(4, 4, 0)]));
        let v = |p| g.vertex_index(&p);
        let values = assignment_from_paths(&m.index, &[vec![v(pt(0, 0, 0)), v(pt(4, 0, 0)), None]], &[vec![p1, p2]]);
        let (layout, warnings) = extract_layout(&inst, &graphs, &m, &values).unwrap();
        assert_eq!(warnings.len(), 1, "{warnings:?}");
        assert_eq!(layout.total_length, 12);
        assert_eq!(layout.installed["T"].len(), 4);
    }

    #[test]
    fn solution_round_trip() {
        let inst = instance();
        let graphs = assemble_forest(&inst).unwrap();
        let m = build_core_model(&inst, &graphs);
        let g = &graphs[0];
        let v = |p| g.vertex_index(&p);
        let values = assignment_from_paths(
            &m.index,
            &[vec![v(pt(0, 0, 0)), v(pt(4, 0, 0)), None]],
            &[vec![walk(g, &[pt(0, 0, 0), pt(4, 0, 0)]), walk(g, &[pt(4, 0, 0), pt(6, 0, 0), pt(6, 2, 0), pt(10, 2, 0)])]],
        );
        let (layout, _) = extract_layout(&inst, &graphs, &m, &values).unwrap();
        let report = SolveReport {
            status: SolveStatus::Optimal,
            objective: Some(12),
            best_bound: Some(12),
            gap: Some(0.0),
            lazy_rows: 0,
            eager_rows: 0,
            nodes: 1,
            workers: 1,
            certificate: None,
            wall_time: Default::default(),
        };
        let sol = Solution::new(Some(&layout), &report);
        let back = Solution::from_json_str(&sol.to_json_string()).unwrap();
        assert_eq!(back, sol);
        assert_eq!(back.layout(), Some(layout));
    }
}
