//! Model-free feasibility check of a layout against raw instance geometry.
//!
//! Nothing here looks at grid graphs or the binary program: paths are
//! re-read as point lists, merged into maximal straight runs, and measured
//! directly.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::diagram::{Instance, NodeRole};
use crate::engine::Layout;
use crate::geometry::{
    l1_segment_distance, l1_segment_polyline_distance, point_on_polyline, segment_hits_obstacle, Length, Point3, Segment3,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    PlacementOutsideRegion,
    PathDisconnected,
    ObstacleHit,
    BranchSeparation,
    PipelineSeparation,
    LeafDegree,
    BendSpacing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub entities: Vec<String>,
    pub measured: Option<Length>,
    pub threshold: Option<Length>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    /// Bend-spacing findings when the check is report-only.
    pub advisories: Vec<Violation>,
    /// Installed length re-measured as the union of each tree's segments.
    pub total_length: Length,
    pub scoping: String,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

pub const SCOPING_NOTE: &str = "separation is checked between different trees and between node-disjoint \
connections of one tree; connections sharing a node may run close to each other";

/// Bend-spacing policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BendGap {
    pub min_gap: Length,
    /// Promote findings from advisories to violations.
    pub enforce: bool,
}

struct Run {
    tree: usize,
    edge: usize,
    seg: Segment3,
    label: String,
}

/// Merge a point list into maximal axis-aligned runs. `None` if two
/// consecutive points are not axis-aligned neighbors.
fn runs(points: &[Point3]) -> Option<Vec<Segment3>> {
    let mut out: Vec<Segment3> = Vec::new();
    for w in points.windows(2) {
        let seg = Segment3::new(w[0], w[1]).ok()?;
        match out.last_mut() {
            Some(last) if last.axis() == seg.axis() && last.b == seg.a && direction(last) == direction(&seg) => {
                last.b = seg.b;
            }
            _ => out.push(seg),
        }
    }
    Some(out)
}

fn direction(s: &Segment3) -> i64 {
    (s.b.coord(s.axis()) - s.a.coord(s.axis())).signum()
}

/// Length of the union of axis-aligned segments.
fn union_length(segs: &[Segment3]) -> Length {
    let mut lines: HashMap<(usize, i64, i64), Vec<(i64, i64)>> = HashMap::new();
    for s in segs {
        let k = s.axis();
        let (o1, o2) = ((k + 1) % 3, (k + 2) % 3);
        let (a, b) = (s.a.coord(k), s.b.coord(k));
        lines.entry((k, s.a.coord(o1), s.a.coord(o2))).or_default().push((a.min(b), a.max(b)));
    }
    let mut total = 0;
    for mut iv in lines.into_values() {
        iv.sort_unstable();
        let (mut lo, mut hi) = iv[0];
        for &(a, b) in &iv[1..] {
            if a > hi {
                total += hi - lo;
                lo = a;
                hi = b;
            } else {
                hi = hi.max(b);
            }
        }
        total += hi - lo;
    }
    total
}

pub fn check_layout(inst: &Instance, layout: &Layout, bend: BendGap) -> ViolationReport {
    let mut violations = Vec::new();
    let mut advisories = Vec::new();
    let mut push = |kind, entities: Vec<String>, measured, threshold| {
        violations.push(Violation { kind, entities, measured, threshold });
    };

    // (a) placements
    for tree in &inst.trees {
        let pipeline = inst.pipeline(&tree.pipeline);
        for node in &tree.nodes {
            let Some(p) = layout.placements.get(&node.id) else {
                push(ViolationKind::PlacementOutsideRegion, vec![node.id.clone(), "missing".into()], None, None);
                continue;
            };
            let ok = match &node.role {
                NodeRole::Root => pipeline.is_some_and(|c| point_on_polyline(p, &c.polyline)),
                NodeRole::Intermediate { region } => region.contains(p),
                NodeRole::Leaf { point } => p == point,
            };
            if !ok {
                push(ViolationKind::PlacementOutsideRegion, vec![node.id.clone()], None, None);
            }
        }
    }

    // (b) one connected path per tree edge
    let mut by_edge: BTreeMap<(&str, &str, &str), Vec<&[Point3]>> = BTreeMap::new();
    for path in &layout.paths {
        by_edge.entry((path.tree.as_str(), path.parent.as_str(), path.child.as_str())).or_default().push(&path.vertices);
    }
    let mut all_runs: Vec<Run> = Vec::new();
    let mut tree_segments: Vec<Vec<Segment3>> = vec![Vec::new(); inst.trees.len()];
    for (t, tree) in inst.trees.iter().enumerate() {
        for (e, (p, c)) in tree.edges.iter().enumerate() {
            let label = format!("{}:{p}->{c}", tree.id);
            let paths = by_edge.get(&(tree.id.as_str(), p.as_str(), c.as_str()));
            let Some(&[points]) = paths.map(|v| v.as_slice()) else {
                push(ViolationKind::PathDisconnected, vec![label, "expected exactly one path".into()], None, None);
                continue;
            };
            let ends_ok = points.first() == layout.placements.get(p) && points.last() == layout.placements.get(c);
            let Some(segs) = runs(points).filter(|_| ends_ok && !points.is_empty()) else {
                push(ViolationKind::PathDisconnected, vec![label], None, None);
                continue;
            };
            // (g) bend spacing: interior runs between two bends
            if bend.min_gap > 0 && segs.len() >= 3 {
                for s in &segs[1..segs.len() - 1] {
                    if s.length() < bend.min_gap {
                        let v = Violation {
                            kind: ViolationKind::BendSpacing,
                            entities: vec![label.clone()],
                            measured: Some(s.length()),
                            threshold: Some(bend.min_gap),
                        };
                        if bend.enforce {
                            push(v.kind, v.entities, v.measured, v.threshold);
                        } else {
                            advisories.push(v);
                        }
                    }
                }
            }
            tree_segments[t].extend(segs.iter().copied());
            all_runs.extend(segs.into_iter().map(|seg| Run { tree: t, edge: e, seg, label: label.clone() }));
        }
    }

    // (c) obstacles
    for r in &all_runs {
        for (k, o) in inst.obstacles.iter().enumerate() {
            if segment_hits_obstacle(&r.seg, o) {
                push(ViolationKind::ObstacleHit, vec![r.label.clone(), format!("obstacle#{k}")], None, None);
            }
        }
    }

    // (d) branch separation
    if inst.delta > 0 {
        let edge_nodes: Vec<Vec<(&str, &str)>> =
            inst.trees.iter().map(|t| t.edges.iter().map(|(p, c)| (p.as_str(), c.as_str())).collect()).collect();
        for (i, r) in all_runs.iter().enumerate() {
            for q in &all_runs[i + 1..] {
                let in_scope = if r.tree != q.tree {
                    true
                } else {
                    let (a, b) = edge_nodes[r.tree][r.edge];
                    let (c, d) = edge_nodes[q.tree][q.edge];
                    a != c && a != d && b != c && b != d
                };
                if !in_scope || r.seg.bounds().l1_distance(&q.seg.bounds()) >= inst.delta {
                    continue;
                }
                let d = l1_segment_distance(&r.seg, &q.seg);
                if d < inst.delta {
                    push(ViolationKind::BranchSeparation, vec![r.label.clone(), q.label.clone()], Some(d), Some(inst.delta));
                }
            }
        }
    }

    // (e) foreign pipelines
    let clearance = inst.pipeline_clearance();
    if clearance > 0 {
        for r in &all_runs {
            let own = &inst.trees[r.tree].pipeline;
            for c in inst.pipelines.iter().filter(|c| &c.id != own) {
                if let Ok(d) = l1_segment_polyline_distance(&r.seg, &c.polyline) {
                    if d < clearance {
                        push(ViolationKind::PipelineSeparation, vec![r.label.clone(), c.id.clone()], Some(d), Some(clearance));
                    }
                }
            }
        }
    }

    // (f) leaf degree, counting segment ends at the leaf point
    for (t, tree) in inst.trees.iter().enumerate() {
        for node in tree.leaves() {
            let NodeRole::Leaf { point } = node.role else { continue };
            let mut degree = 0;
            for s in &tree_segments[t] {
                if s.a == point || s.b == point {
                    degree += 1;
                } else if s.contains(&point) {
                    degree += 2;
                }
            }
            if degree != 1 {
                push(ViolationKind::LeafDegree, vec![node.id.clone()], Some(degree), Some(1));
            }
        }
    }

    let total_length = tree_segments.iter().map(|s| if s.is_empty() { 0 } else { union_length(s) }).sum();
    ViolationReport { violations, advisories, total_length, scoping: SCOPING_NOTE.into() }
}
