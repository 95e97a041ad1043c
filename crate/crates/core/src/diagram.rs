//! Problem input: pipelines, the wiring forest, obstacles and safety parameters.
//!
//! The on-disk form is versioned JSON (`format: 1`). Coordinates are integer
//! triples, node ids are unique across the whole instance.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Box3, Length, Obstacle, ObstacleShape, Point3};

pub const INSTANCE_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format version {0} (expected 1)")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipeline {
    pub id: String,
    pub polyline: Vec<Point3>,
}

impl Pipeline {
    pub fn length(&self) -> Length {
        self.polyline.windows(2).map(|w| w[0].l1(&w[1])).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum NodeRole {
    /// Placed on the tree's pipeline; anchors come from discretization.
    Root,
    Intermediate {
        region: Box3,
    },
    Leaf {
        point: Point3,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: String,
    #[serde(flatten)]
    pub role: NodeRole,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<String>,
}

impl TreeNode {
    pub fn is_root(&self) -> bool {
        matches!(self.role, NodeRole::Root)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.role, NodeRole::Leaf { .. })
    }

    /// Admissible box for intermediates and leaves; `None` for the root.
    pub fn region(&self) -> Option<Box3> {
        match self.role {
            NodeRole::Root => None,
            NodeRole::Intermediate { region } => Some(region),
            NodeRole::Leaf { point } => Some(Box3::point(point)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WiringTree {
    pub id: String,
    pub pipeline: String,
    pub root: String,
    pub nodes: Vec<TreeNode>,
    /// Parent → child pairs.
    pub edges: Vec<(String, String)>,
}

impl WiringTree {
    pub fn node(&self, id: &str) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Node ids in breadth-first order from the root.
    pub fn bfs_order(&self) -> Vec<&str> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.root.as_str()]);
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            order.push(id);
            if let Some(n) = self.node(id) {
                queue.extend(n.children.iter().map(String::as_str));
            }
        }
        order
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_params: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub format: u32,
    pub region: Box3,
    pub pipelines: Vec<Pipeline>,
    pub trees: Vec<WiringTree>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub delta: Length,
    /// Minimum distance from a branch to a foreign pipeline; defaults to `delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline_clearance: Option<Length>,
    #[serde(default)]
    pub meta: InstanceMeta,
}

impl Instance {
    pub fn from_json_str(s: &str) -> Result<Self, FormatError> {
        let inst: Instance = serde_json::from_str(s)?;
        if inst.format != INSTANCE_FORMAT {
            return Err(FormatError::Version(inst.format));
        }
        Ok(inst)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn pipeline_clearance(&self) -> Length {
        self.pipeline_clearance.unwrap_or(self.delta)
    }

    pub fn pipeline(&self, id: &str) -> Option<&Pipeline> {
        self.pipelines.iter().find(|p| p.id == id)
    }

    pub fn tree(&self, id: &str) -> Option<&WiringTree> {
        self.trees.iter().find(|t| t.id == id)
    }

    pub fn with_delta(&self, delta: Length) -> Instance {
        Instance { delta, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Parameter,
    Duplicate,
    Reference,
    Arborescence,
    Containment,
    Geometry,
}

/// One structural problem with an instance, naming the offending entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceIssue {
    pub kind: IssueKind,
    pub entity: String,
    pub detail: String,
}

impl std::fmt::Display for InstanceIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} in {}: {}", self.kind, self.entity, self.detail)
    }
}

struct Issues(Vec<InstanceIssue>);

impl Issues {
    fn push(&mut self, kind: IssueKind, entity: impl Into<String>, detail: impl Into<String>) {
        self.0.push(InstanceIssue { kind, entity: entity.into(), detail: detail.into() });
    }
}

/// Checks every structural invariant of the input; empty result means valid.
pub fn validate_instance(inst: &Instance) -> Vec<InstanceIssue> {
    let mut out = Issues(Vec::new());
    use IssueKind::*;

    if inst.format != INSTANCE_FORMAT {
        out.push(Parameter, "instance", format!("format {} unsupported", inst.format));
    }
    if inst.delta < 0 {
        out.push(Parameter, "delta", format!("negative safety distance {}", inst.delta));
    }
    if inst.pipeline_clearance() < 0 {
        out.push(Parameter, "pipeline_clearance", "negative clearance");
    }
    if !inst.region.is_valid() {
        out.push(Geometry, "region", "inverted region box");
    }

    let mut pipeline_ids = BTreeSet::new();
    for p in &inst.pipelines {
        if !pipeline_ids.insert(p.id.as_str()) {
            out.push(Duplicate, &p.id, "duplicate pipeline id");
        }
        if p.polyline.len() < 2 {
            out.push(Geometry, &p.id, "pipeline needs at least two points");
        }
        for w in p.polyline.windows(2) {
            if w[0].differing_axes(&w[1]) != 1 {
                out.push(Geometry, &p.id, format!("edge {:?} -> {:?} is not an axis-aligned step", w[0], w[1]));
            }
        }
    }

    for (i, o) in inst.obstacles.iter().enumerate() {
        let name = format!("obstacle[{i}]");
        if o.clearance < 0 {
            out.push(Parameter, &name, "negative clearance");
        }
        match &o.shape {
            ObstacleShape::SolidBox { bounds } => {
                if !bounds.is_valid() {
                    out.push(Geometry, &name, "inverted box");
                }
            }
            ObstacleShape::WallWithOpenings { slab, openings } => {
                if !slab.is_valid() {
                    out.push(Geometry, &name, "inverted slab");
                }
                for (j, op) in openings.iter().enumerate() {
                    if !op.is_valid() || !slab.contains_box(op) {
                        out.push(Geometry, &name, format!("opening {j} not inside slab"));
                    }
                    for (k, other) in openings.iter().enumerate().skip(j + 1) {
                        if op.intersects(other) {
                            out.push(Geometry, &name, format!("openings {j} and {k} overlap"));
                        }
                    }
                }
            }
        }
    }

    let mut node_ids: HashMap<&str, &str> = HashMap::new();
    let mut tree_ids = BTreeSet::new();
    for t in &inst.trees {
        if !tree_ids.insert(t.id.as_str()) {
            out.push(Duplicate, &t.id, "duplicate tree id");
        }
        if inst.pipeline(&t.pipeline).is_none() {
            out.push(Reference, &t.id, format!("unknown pipeline '{}'", t.pipeline));
        }
        for n in &t.nodes {
            if let Some(prev) = node_ids.insert(n.id.as_str(), t.id.as_str()) {
                out.push(Duplicate, &n.id, format!("node id also used in tree '{prev}'"));
            }
        }
        validate_tree(inst, t, &mut out);
    }
    out.0
}

fn validate_tree(inst: &Instance, t: &WiringTree, out: &mut Issues) {
    use IssueKind::*;
    let roots: Vec<&TreeNode> = t.nodes.iter().filter(|n| n.is_root()).collect();
    if roots.len() != 1 {
        out.push(Arborescence, &t.id, format!("expected exactly one root, found {}", roots.len()));
    }
    match t.node(&t.root) {
        None => out.push(Reference, &t.id, format!("root '{}' not among nodes", t.root)),
        Some(n) if !n.is_root() => out.push(Arborescence, &t.root, "declared root does not have the root role"),
        _ => {}
    }

    let known: BTreeSet<&str> = t.nodes.iter().map(|n| n.id.as_str()).collect();
    let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
    for (p, c) in &t.edges {
        if !known.contains(p.as_str()) || !known.contains(c.as_str()) {
            out.push(Reference, &t.id, format!("edge ({p}, {c}) references an unknown node"));
            continue;
        }
        if let Some(prev) = parent_of.insert(c.as_str(), p.as_str()) {
            out.push(Arborescence, c, format!("has two parents: '{prev}' and '{p}'"));
        }
        if c == &t.root {
            out.push(Arborescence, c, "root has a parent edge");
        }
        let listed = t.node(p).is_some_and(|n| n.children.iter().any(|x| x == c));
        if !listed {
            out.push(Arborescence, p, format!("edge to '{c}' missing from children list"));
        }
    }
    // each leaf takes exactly one incoming connection, so two terminals of
    // one tree cannot share a point
    let mut leaf_at: BTreeMap<Point3, &str> = BTreeMap::new();
    for n in &t.nodes {
        if let NodeRole::Leaf { point } = n.role {
            if let Some(prev) = leaf_at.insert(point, n.id.as_str()) {
                out.push(Geometry, &n.id, format!("leaf point {point:?} already used by '{prev}'"));
            }
        }
    }
    let edge_set: BTreeSet<(&str, &str)> = t.edges.iter().map(|(p, c)| (p.as_str(), c.as_str())).collect();
    for n in &t.nodes {
        for c in &n.children {
            if !edge_set.contains(&(n.id.as_str(), c.as_str())) {
                out.push(Arborescence, &n.id, format!("child '{c}' has no tree edge"));
            }
        }
        match &n.role {
            NodeRole::Leaf { point } => {
                if !n.children.is_empty() {
                    out.push(Arborescence, &n.id, "leaf has children");
                }
                if !inst.region.contains(point) {
                    out.push(Containment, &n.id, format!("leaf point {point:?} outside region"));
                }
            }
            NodeRole::Intermediate { region } => {
                if n.children.is_empty() {
                    out.push(Arborescence, &n.id, "intermediate node has no children");
                }
                if !region.is_valid() {
                    out.push(Geometry, &n.id, "inverted admissible box");
                } else if !inst.region.contains_box(region) {
                    out.push(Containment, &n.id, "admissible box outside region");
                }
            }
            NodeRole::Root => {
                if n.children.is_empty() {
                    out.push(Arborescence, &n.id, "root has no children");
                }
            }
        }
    }
    if t.edges.len() + 1 != t.nodes.len() {
        out.push(Arborescence, &t.id, format!("{} edges for {} nodes", t.edges.len(), t.nodes.len()));
    }
    let reached = t.bfs_order().len();
    if reached != t.nodes.len() {
        out.push(Arborescence, &t.id, format!("{} of {} nodes reachable from root", reached, t.nodes.len()));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub leaves: usize,
    pub intermediates: usize,
    /// Longest root-to-leaf edge count.
    pub depth: usize,
}

pub fn tree_statistics(inst: &Instance) -> Vec<(String, TreeStats)> {
    inst.trees
        .iter()
        .map(|t| {
            let mut depth_of: HashMap<&str, usize> = HashMap::new();
            depth_of.insert(t.root.as_str(), 0);
            let mut depth = 0;
            for id in t.bfs_order() {
                let d = depth_of[id];
                depth = depth.max(d);
                if let Some(n) = t.node(id) {
                    for c in &n.children {
                        depth_of.insert(c.as_str(), d + 1);
                    }
                }
            }
            let stats = TreeStats {
                nodes: t.nodes.len(),
                leaves: t.nodes.iter().filter(|n| n.is_leaf()).count(),
                intermediates: t.nodes.iter().filter(|n| matches!(n.role, NodeRole::Intermediate { .. })).count(),
                depth,
            };
            (t.id.clone(), stats)
        })
        .collect()
}

/// Builder used by tests, examples and the generator.
#[derive(Debug, Clone)]
pub struct TreeBuilder {
    tree: WiringTree,
}

impl TreeBuilder {
    pub fn new(id: impl Into<String>, pipeline: impl Into<String>, root: impl Into<String>) -> Self {
        let root = root.into();
        TreeBuilder {
            tree: WiringTree {
                id: id.into(),
                pipeline: pipeline.into(),
                root: root.clone(),
                nodes: vec![TreeNode { id: root, role: NodeRole::Root, children: vec![] }],
                edges: vec![],
            },
        }
    }

    fn attach(mut self, parent: &str, node: TreeNode) -> Self {
        let id = node.id.clone();
        self.tree.nodes.push(node);
        if let Some(p) = self.tree.nodes.iter_mut().find(|n| n.id == parent) {
            p.children.push(id.clone());
        }
        self.tree.edges.push((parent.to_string(), id));
        self
    }

    pub fn intermediate(self, parent: &str, id: impl Into<String>, region: Box3) -> Self {
        self.attach(parent, TreeNode { id: id.into(), role: NodeRole::Intermediate { region }, children: vec![] })
    }

    pub fn leaf(self, parent: &str, id: impl Into<String>, point: Point3) -> Self {
        self.attach(parent, TreeNode { id: id.into(), role: NodeRole::Leaf { point }, children: vec![] })
    }

    pub fn build(self) -> WiringTree {
        self.tree
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(lo: i64, hi: i64) -> Box3 {
        Box3::new(Point3::new(lo, lo, lo), Point3::new(hi, hi, hi)).unwrap()
    }

    fn small_instance() -> Instance {
        let tree =
            TreeBuilder::new("T0", "c0", "r0").intermediate("r0", "v1", cube(20, 30)).leaf("v1", "l1", Point3::new(90, 25, 25)).build();
        Instance {
            format: INSTANCE_FORMAT,
            region: cube(0, 100),
            pipelines: vec![Pipeline { id: "c0".into(), polyline: vec![Point3::new(0, 0, 0), Point3::new(0, 90, 0)] }],
            trees: vec![tree],
            obstacles: vec![],
            delta: 1,
            pipeline_clearance: None,
            meta: InstanceMeta::default(),
        }
    }

    #[test]
    fn well_formed_instance_is_clean() {
        assert_eq!(validate_instance(&small_instance()), vec![]);
    }

    #[test]
    fn root_with_parent_edge_is_flagged() {
        let mut inst = small_instance();
        let t = &mut inst.trees[0];
        // v1 -> r0 in addition to r0 -> v1 would create a cycle; instead make
        // the root a child of v1 and drop the original edge.
        t.edges.retain(|(p, _)| p != "r0");
        t.nodes[0].children.clear();
        t.edges.push(("v1".into(), "r0".into()));
        t.nodes[1].children.push("r0".into());
        let issues = validate_instance(&inst);
        let root_issues: Vec<_> =
            issues.iter().filter(|i| i.kind == IssueKind::Arborescence && i.entity == "r0" && i.detail.contains("parent")).collect();
        assert_eq!(root_issues.len(), 1, "{issues:#?}");
    }

    #[test]
    fn leaf_outside_region_is_flagged() {
        let mut inst = small_instance();
        inst.trees[0].nodes[2].role = NodeRole::Leaf { point: Point3::new(150, 25, 25) };
        let issues = validate_instance(&inst);
        assert_eq!(issues.len(), 1, "{issues:#?}");
        assert_eq!(issues[0].kind, IssueKind::Containment);
        assert_eq!(issues[0].entity, "l1");
    }

    #[test]
    fn coincident_leaves_of_one_tree_are_flagged() {
        let mut inst = small_instance();
        let t = &mut inst.trees[0];
        t.nodes[1].children.push("l2".into());
        t.nodes.push(TreeNode { id: "l2".into(), role: NodeRole::Leaf { point: Point3::new(90, 25, 25) }, children: vec![] });
        t.edges.push(("v1".into(), "l2".into()));
        let issues = validate_instance(&inst);
        assert_eq!(issues.len(), 1, "{issues:#?}");
        assert_eq!((issues[0].kind, issues[0].entity.as_str()), (IssueKind::Geometry, "l2"));
    }

    #[test]
    fn unknown_pipeline_and_duplicate_ids() {
        let mut inst = small_instance();
        inst.trees[0].pipeline = "nope".into();
        let mut t2 = inst.trees[0].clone();
        t2.id = "T1".into();
        inst.trees.push(t2);
        let issues = validate_instance(&inst);
        assert!(issues.iter().any(|i| i.kind == IssueKind::Reference));
        assert!(issues.iter().any(|i| i.kind == IssueKind::Duplicate && i.entity == "v1"));
    }

    #[test]
    fn statistics_for_path_and_star() {
        let inst = small_instance();
        assert_eq!(tree_statistics(&inst)[0].1, TreeStats { nodes: 3, leaves: 1, intermediates: 1, depth: 2 });
        let star = TreeBuilder::new("S", "c0", "r")
            .leaf("r", "a", Point3::new(1, 0, 0))
            .leaf("r", "b", Point3::new(2, 0, 0))
            .leaf("r", "c", Point3::new(3, 0, 0))
            .build();
        let inst = Instance { trees: vec![star], ..small_instance() };
        assert_eq!(tree_statistics(&inst)[0].1, TreeStats { nodes: 4, leaves: 3, intermediates: 0, depth: 1 });
    }

    #[test]
    fn json_shape_and_round_trip() {
        let inst = small_instance();
        let s = inst.to_json_string();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        for key in ["format", "region", "pipelines", "trees", "obstacles", "delta", "meta"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["trees"][0]["nodes"][1]["role"], "intermediate");
        assert_eq!(Instance::from_json_str(&s).unwrap(), inst);
    }

    #[test]
    fn rejects_unknown_version() {
        let mut inst = small_instance();
        inst.format = 7;
        assert!(matches!(Instance::from_json_str(&inst.to_json_string()), Err(FormatError::Version(7))));
    }
}
