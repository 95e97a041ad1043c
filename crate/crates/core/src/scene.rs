//! Static 3-D scene export for offline viewing.
//!
//! Two flat formats: Wavefront OBJ with one named group per entity (boxes as
//! faces, routes as `l` polylines, placements as `p` points) and a CSV table
//! with one row per straight segment. Both list entities in a fixed order:
//! obstacles, pipelines, regions, branches, placements.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::diagram::{Instance, NodeRole};
use crate::engine::Layout;
use crate::geometry::{Box3, Length, ObstacleShape, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneFormat {
    ObjPolylines,
    CsvSegments,
}

impl FromStr for SceneFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" | "obj_polylines" => Ok(SceneFormat::ObjPolylines),
            "csv" | "csv_segments" => Ok(SceneFormat::CsvSegments),
            other => Err(format!("unknown scene format '{other}' (expected obj or csv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Obstacle,
    Opening,
    Pipeline,
    Region,
    Branch,
    Placement,
}

/// One row of the CSV scene. Boxes are written as their 12 edges, so every
/// row is a segment or, for placements, a single point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SegmentRecord {
    pub kind: EntityKind,
    pub entity: String,
    pub x0: i64,
    pub y0: i64,
    pub z0: i64,
    pub x1: i64,
    pub y1: i64,
    pub z1: i64,
    pub length: Length,
}

impl SegmentRecord {
    fn new(kind: EntityKind, entity: &str, a: Point3, b: Point3) -> Self {
        SegmentRecord { kind, entity: entity.to_string(), x0: a.x, y0: a.y, z0: a.z, x1: b.x, y1: b.y, z1: b.z, length: a.l1(&b) }
    }
}

enum Shape {
    Cuboid(Box3),
    Polyline(Vec<Point3>),
    /// Disconnected segments, e.g. a tree's installed arcs.
    Segments(Vec<[Point3; 2]>),
    Point(Point3),
}

struct Entity {
    kind: EntityKind,
    name: String,
    shape: Shape,
}

fn entities(inst: &Instance, layout: Option<&Layout>) -> Vec<Entity> {
    let mut out = Vec::new();
    for (i, o) in inst.obstacles.iter().enumerate() {
        match &o.shape {
            ObstacleShape::SolidBox { bounds } => {
                out.push(Entity { kind: EntityKind::Obstacle, name: format!("obstacle{i}"), shape: Shape::Cuboid(*bounds) });
            }
            ObstacleShape::WallWithOpenings { slab, openings } => {
                out.push(Entity { kind: EntityKind::Obstacle, name: format!("obstacle{i}"), shape: Shape::Cuboid(*slab) });
                for (k, b) in openings.iter().enumerate() {
                    out.push(Entity { kind: EntityKind::Opening, name: format!("obstacle{i}o{k}"), shape: Shape::Cuboid(*b) });
                }
            }
        }
    }
    for p in &inst.pipelines {
        out.push(Entity { kind: EntityKind::Pipeline, name: p.id.clone(), shape: Shape::Polyline(p.polyline.clone()) });
    }
    for t in &inst.trees {
        for n in &t.nodes {
            if let NodeRole::Intermediate { region } = n.role {
                out.push(Entity { kind: EntityKind::Region, name: n.id.clone(), shape: Shape::Cuboid(region) });
            }
        }
    }
    if let Some(l) = layout {
        for (tree, arcs) in &l.installed {
            out.push(Entity { kind: EntityKind::Branch, name: tree.clone(), shape: Shape::Segments(arcs.clone()) });
        }
        for (id, p) in &l.placements {
            out.push(Entity { kind: EntityKind::Placement, name: id.clone(), shape: Shape::Point(*p) });
        }
    }
    out
}

fn box_edges(b: &Box3) -> Vec<[Point3; 2]> {
    let c = b.corners();
    let mut edges = Vec::new();
    for i in 0..8 {
        for j in i + 1..8 {
            if c[i].differing_axes(&c[j]) == 1 {
                edges.push([c[i], c[j]]);
            }
        }
    }
    edges.dedup();
    edges
}

/// Segment rows for the whole scene. Branch rows are the installed arcs, so
/// their lengths add up to the layout objective.
pub fn scene_segments(inst: &Instance, layout: Option<&Layout>) -> Vec<SegmentRecord> {
    let mut rows = Vec::new();
    for e in entities(inst, layout) {
        let segs: Vec<[Point3; 2]> = match e.shape {
            Shape::Cuboid(b) => box_edges(&b),
            Shape::Polyline(p) => p.windows(2).map(|w| [w[0], w[1]]).collect(),
            Shape::Segments(s) => s,
            Shape::Point(p) => vec![[p, p]],
        };
        rows.extend(segs.into_iter().map(|[a, b]| SegmentRecord::new(e.kind, &e.name, a, b)));
    }
    rows
}

pub fn write_csv_segments<W: Write>(inst: &Instance, layout: Option<&Layout>, w: W) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in scene_segments(inst, layout) {
        wtr.serialize(r)?;
    }
    wtr.flush()
}

pub fn write_obj<W: Write>(inst: &Instance, layout: Option<&Layout>, mut w: W) -> io::Result<()> {
    let mut s = String::from("# wirelayr scene\n");
    let mut next = 1usize;
    let mut vertex = |s: &mut String, p: Point3| {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
        next += 1;
        next - 1
    };
    for e in entities(inst, layout) {
        let _ = writeln!(s, "g {:?}_{}", e.kind, e.name);
        match e.shape {
            Shape::Cuboid(b) => {
                let c = b.corners();
                let first = vertex(&mut s, c[0]);
                for p in &c[1..] {
                    vertex(&mut s, *p);
                }
                // corner index bits: 1 = x, 2 = y, 4 = z at max
                for f in [[0, 1, 3, 2], [4, 6, 7, 5], [0, 4, 5, 1], [2, 3, 7, 6], [0, 2, 6, 4], [1, 5, 7, 3]] {
                    let _ = writeln!(s, "f {} {} {} {}", first + f[0], first + f[1], first + f[2], first + f[3]);
                }
            }
            Shape::Polyline(p) => {
                let ids: Vec<String> = p.iter().map(|&q| vertex(&mut s, q).to_string()).collect();
                let _ = writeln!(s, "l {}", ids.join(" "));
            }
            Shape::Segments(segs) => {
                for [a, b] in segs {
                    let (i, j) = (vertex(&mut s, a), vertex(&mut s, b));
                    let _ = writeln!(s, "l {i} {j}");
                }
            }
            Shape::Point(p) => {
                let i = vertex(&mut s, p);
                let _ = writeln!(s, "p {i}");
            }
        }
    }
    w.write_all(s.as_bytes())
}

pub fn export_scene<W: Write>(inst: &Instance, layout: Option<&Layout>, format: SceneFormat, w: W) -> io::Result<()> {
    match format {
        SceneFormat::ObjPolylines => write_obj(inst, layout, w),
        SceneFormat::CsvSegments => write_csv_segments(inst, layout, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{solve_instance, SolveParams};
    use crate::synth::{generate, GeneratorParams};

    fn small() -> Instance {
        generate(&GeneratorParams { seed: 3, pipelines: 1, branches: 2, nodes: 3, delta: 1, ..Default::default() }).unwrap()
    }

    #[test]
    fn no_layout_has_only_static_entities() {
        let inst = small();
        let rows = scene_segments(&inst, None);
        assert!(rows.iter().all(|r| matches!(r.kind, EntityKind::Pipeline | EntityKind::Region)));
        let regions = inst.trees.iter().flat_map(|t| &t.nodes).filter(|n| matches!(n.role, NodeRole::Intermediate { .. })).count();
        assert_eq!(rows.iter().filter(|r| r.kind == EntityKind::Region).count(), 12 * regions);
    }

    #[test]
    fn branch_rows_sum_to_objective() {
        let inst = small();
        let out = solve_instance(&inst, &SolveParams::default());
        let layout = out.layout.unwrap();
        let rows = scene_segments(&inst, Some(&layout));
        let total: Length = rows.iter().filter(|r| r.kind == EntityKind::Branch).map(|r| r.length).sum();
        assert_eq!(total, layout.total_length);
        let points = rows.iter().filter(|r| r.kind == EntityKind::Placement).count();
        assert_eq!(points, layout.placements.len());
    }

    #[test]
    fn obj_is_deterministic_and_indexes_in_range() {
        let inst = small();
        let layout = solve_instance(&inst, &SolveParams::default()).layout;
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_obj(&inst, layout.as_ref(), &mut a).unwrap();
        write_obj(&inst, layout.as_ref(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let nv = text.lines().filter(|l| l.starts_with("v ")).count();
        for l in text.lines().filter(|l| l.starts_with(['f', 'l', 'p'])) {
            for tok in l.split_whitespace().skip(1) {
                let i: usize = tok.parse().unwrap();
                assert!((1..=nv).contains(&i), "{l}");
            }
        }
    }

    #[test]
    fn box_has_twelve_edges() {
        let b = Box3::spanning(Point3::new(0, 0, 0), Point3::new(1, 2, 3));
        let e = box_edges(&b);
        assert_eq!(e.len(), 12);
        assert_eq!(e.iter().map(|[a, b]| a.l1(b)).sum::<Length>(), 4 * 6);
    }
}
