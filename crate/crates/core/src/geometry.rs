//! Axis-aligned 3D primitives and exact ℓ1 kernels.
//!
//! All coordinates are integers in instance length units, so every distance
//! and containment test below is exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length in instance units.
pub type Length = i64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("segment {0:?} -> {1:?} is not axis-aligned")]
    NotAxisAligned(Point3, Point3),
    #[error("segment endpoints coincide at {0:?}")]
    Degenerate(Point3),
    #[error("box min {0:?} exceeds max {1:?}")]
    InvertedBox(Point3, Point3),
    #[error("polyline needs at least 2 points, got {0}")]
    ShortPolyline(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[i64; 3]", into = "[i64; 3]")]
pub struct Point3 {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl From<[i64; 3]> for Point3 {
    fn from(c: [i64; 3]) -> Self {
        Point3 { x: c[0], y: c[1], z: c[2] }
    }
}

impl From<Point3> for [i64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Point3 {
    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        Point3 { x, y, z }
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }

    #[inline]
    pub fn with_coord(mut self, axis: usize, value: i64) -> Self {
        match axis {
            0 => self.x = value,
            1 => self.y = value,
            2 => self.z = value,
            _ => panic!("axis {axis} out of range"),
        }
        self
    }

    pub fn l1(&self, other: &Point3) -> Length {
        l1_point_distance(*self, *other)
    }

    /// Number of coordinates in which the two points differ.
    pub fn differing_axes(&self, other: &Point3) -> usize {
        (0..3).filter(|&k| self.coord(k) != other.coord(k)).count()
    }
}

/// Closed axis-aligned box. Degenerate boxes (points, segments) are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Box3 {
    pub min: Point3,
    pub max: Point3,
}

impl Box3 {
    pub fn new(min: Point3, max: Point3) -> Result<Self, GeometryError> {
        if (0..3).any(|k| min.coord(k) > max.coord(k)) {
            return Err(GeometryError::InvertedBox(min, max));
        }
        Ok(Box3 { min, max })
    }

    /// Box spanned by two arbitrary corners.
    pub fn spanning(a: Point3, b: Point3) -> Self {
        Box3 { min: Point3::new(a.x.min(b.x), a.y.min(b.y), a.z.min(b.z)), max: Point3::new(a.x.max(b.x), a.y.max(b.y), a.z.max(b.z)) }
    }

    pub fn point(p: Point3) -> Self {
        Box3 { min: p, max: p }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|k| self.min.coord(k) <= self.max.coord(k))
    }

    #[inline]
    pub fn lo(&self, axis: usize) -> i64 {
        self.min.coord(axis)
    }

    #[inline]
    pub fn hi(&self, axis: usize) -> i64 {
        self.max.coord(axis)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|k| self.lo(k) <= p.coord(k) && p.coord(k) <= self.hi(k))
    }

    pub fn contains_box(&self, other: &Box3) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    /// Closed-set intersection test (touching counts).
    pub fn intersects(&self, other: &Box3) -> bool {
        (0..3).all(|k| self.lo(k) <= other.hi(k) && other.lo(k) <= self.hi(k))
    }

    pub fn intersection(&self, other: &Box3) -> Option<Box3> {
        if !self.intersects(other) {
            return None;
        }
        let lo = |k| self.lo(k).max(other.lo(k));
        let hi = |k| self.hi(k).min(other.hi(k));
        Some(Box3 { min: Point3::new(lo(0), lo(1), lo(2)), max: Point3::new(hi(0), hi(1), hi(2)) })
    }

    /// ℓ∞ inflation by `c` on every side.
    pub fn inflate(&self, c: Length) -> Box3 {
        Box3 {
            min: Point3::new(self.min.x - c, self.min.y - c, self.min.z - c),
            max: Point3::new(self.max.x + c, self.max.y + c, self.max.z + c),
        }
    }

    pub fn corners(&self) -> [Point3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Point3::new(a.x, a.y, a.z),
            Point3::new(b.x, a.y, a.z),
            Point3::new(a.x, b.y, a.z),
            Point3::new(b.x, b.y, a.z),
            Point3::new(a.x, a.y, b.z),
            Point3::new(b.x, a.y, b.z),
            Point3::new(a.x, b.y, b.z),
            Point3::new(b.x, b.y, b.z),
        ]
    }

    /// ℓ1 distance between two boxes: per-axis interval gaps summed.
    pub fn l1_distance(&self, other: &Box3) -> Length {
        (0..3).map(|k| interval_gap(self.lo(k), self.hi(k), other.lo(k), other.hi(k))).sum()
    }
}

#[inline]
fn interval_gap(lo1: i64, hi1: i64, lo2: i64, hi2: i64) -> Length {
    (lo1.max(lo2) - hi1.min(hi2)).max(0)
}

/// Axis-aligned segment with distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment3 {
    pub a: Point3,
    pub b: Point3,
}

impl Segment3 {
    pub fn new(a: Point3, b: Point3) -> Result<Self, GeometryError> {
        match a.differing_axes(&b) {
            0 => Err(GeometryError::Degenerate(a)),
            1 => Ok(Segment3 { a, b }),
            _ => Err(GeometryError::NotAxisAligned(a, b)),
        }
    }

    pub fn axis(&self) -> usize {
        (0..3).find(|&k| self.a.coord(k) != self.b.coord(k)).expect("segment is non-degenerate")
    }

    pub fn length(&self) -> Length {
        self.a.l1(&self.b)
    }

    pub fn bounds(&self) -> Box3 {
        Box3::spanning(self.a, self.b)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.bounds().contains(p)
    }
}

pub fn l1_point_distance(p: Point3, q: Point3) -> Length {
    (p.x - q.x).abs() + (p.y - q.y).abs() + (p.z - q.z).abs()
}

/// Minimum ℓ1 distance over point pairs of two axis-aligned segments.
///
/// Axis-aligned segments are boxes, and the ℓ1 distance between boxes
/// separates into independent per-axis interval gaps.
pub fn l1_segment_distance(s: &Segment3, t: &Segment3) -> Length {
    s.bounds().l1_distance(&t.bounds())
}

/// Minimum ℓ1 distance from a segment to an axis-aligned polyline.
pub fn l1_segment_polyline_distance(s: &Segment3, polyline: &[Point3]) -> Result<Length, GeometryError> {
    box_polyline_distance(&s.bounds(), polyline)
}

/// Same as [`l1_segment_polyline_distance`] for any box (points included).
pub fn box_polyline_distance(b: &Box3, polyline: &[Point3]) -> Result<Length, GeometryError> {
    if polyline.len() < 2 {
        return Err(GeometryError::ShortPolyline(polyline.len()));
    }
    let mut best = Length::MAX;
    for w in polyline.windows(2) {
        if w[0].differing_axes(&w[1]) > 1 {
            return Err(GeometryError::NotAxisAligned(w[0], w[1]));
        }
        best = best.min(b.l1_distance(&Box3::spanning(w[0], w[1])));
    }
    Ok(best)
}

/// True when `p` lies on the closed polyline.
pub fn point_on_polyline(p: &Point3, polyline: &[Point3]) -> bool {
    if polyline.len() == 1 {
        return polyline[0] == *p;
    }
    polyline.windows(2).any(|w| Box3::spanning(w[0], w[1]).contains(p))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleShape {
    SolidBox {
        bounds: Box3,
    },
    /// A slab crossed by rectangular openings. Along an axis where an
    /// opening spans the whole slab, the opening passes through the wall.
    WallWithOpenings {
        slab: Box3,
        openings: Vec<Box3>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obstacle {
    #[serde(flatten)]
    pub shape: ObstacleShape,
    #[serde(default)]
    pub clearance: Length,
}

impl Obstacle {
    pub fn solid(bounds: Box3, clearance: Length) -> Self {
        Obstacle { shape: ObstacleShape::SolidBox { bounds }, clearance }
    }

    pub fn wall(slab: Box3, openings: Vec<Box3>, clearance: Length) -> Self {
        Obstacle { shape: ObstacleShape::WallWithOpenings { slab, openings }, clearance }
    }

    /// Outer envelope of the obstacle after clearance inflation.
    pub fn envelope(&self) -> Box3 {
        match &self.shape {
            ObstacleShape::SolidBox { bounds } => bounds.inflate(self.clearance),
            ObstacleShape::WallWithOpenings { slab, .. } => slab.inflate(self.clearance),
        }
    }

    /// Closed-set hit test for any box, typically a segment or a point.
    pub fn hits_box(&self, b: &Box3) -> bool {
        let c = self.clearance;
        match &self.shape {
            ObstacleShape::SolidBox { bounds } => bounds.inflate(c).intersects(b),
            ObstacleShape::WallWithOpenings { slab, openings } => {
                let Some(inside) = slab.inflate(c).intersection(b) else {
                    return false;
                };
                // `inside` is connected and the openings are disjoint, so it
                // passes only if a single opening holds all of it.
                !openings.iter().any(|o| opening_admits(slab, o, c, &inside))
            }
        }
    }
}

/// Whether `piece` lies strictly inside opening `o` shrunk by `c`.
fn opening_admits(slab: &Box3, o: &Box3, c: Length, piece: &Box3) -> bool {
    (0..3).all(|k| {
        if o.lo(k) <= slab.lo(k) && o.hi(k) >= slab.hi(k) {
            // through-axis of the opening
            true
        } else {
            o.lo(k) + c < piece.lo(k) && piece.hi(k) < o.hi(k) - c
        }
    })
}

pub fn segment_hits_obstacle(s: &Segment3, o: &Obstacle) -> bool {
    o.hits_box(&s.bounds())
}

pub fn point_hits_obstacle(p: &Point3, o: &Obstacle) -> bool {
    o.hits_box(&Box3::point(*p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(a: [i64; 3], b: [i64; 3]) -> Segment3 {
        Segment3::new(a.into(), b.into()).unwrap()
    }

    /// Brute-force minimum over integer sample points of both segments.
    fn sampled_min(s: &Segment3, t: &Segment3) -> Length {
        let pts = |g: &Segment3| {
            let b = g.bounds();
            let mut v = Vec::new();
            for x in b.min.x..=b.max.x {
                for y in b.min.y..=b.max.y {
                    for z in b.min.z..=b.max.z {
                        v.push(Point3::new(x, y, z));
                    }
                }
            }
            v
        };
        let (ps, qs) = (pts(s), pts(t));
        ps.iter().flat_map(|p| qs.iter().map(move |q| p.l1(q))).min().unwrap()
    }

    #[test]
    fn point_distance_examples() {
        assert_eq!(l1_point_distance(Point3::new(0, 0, 0), Point3::new(0, 0, 0)), 0);
        assert_eq!(l1_point_distance(Point3::new(50, 0, 0), Point3::new(50, 90, 0)), 90);
        assert_eq!(l1_point_distance(Point3::new(1, 2, 3), Point3::new(4, 0, 3)), 5);
    }

    #[test]
    fn segment_distance_examples() {
        let s = seg([0, 0, 0], [10, 0, 0]);
        assert_eq!(l1_segment_distance(&s, &s), 0);
        assert_eq!(l1_segment_distance(&s, &seg([0, 3, 0], [10, 3, 0])), 3);
        let t = seg([12, 4, 5], [12, 9, 5]);
        assert_eq!(sampled_min(&s, &t), 11);
        assert_eq!(l1_segment_distance(&s, &t), 11);
    }

    #[test]
    fn segment_rejects_bad_input() {
        assert!(matches!(Segment3::new(Point3::new(0, 0, 0), Point3::new(1, 1, 0)), Err(GeometryError::NotAxisAligned(..))));
        assert!(matches!(Segment3::new(Point3::new(2, 2, 2), Point3::new(2, 2, 2)), Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn polyline_distance_examples() {
        let l_shape = [Point3::new(0, 0, 0), Point3::new(10, 0, 0), Point3::new(10, 10, 0)];
        let s = seg([0, 5, 0], [0, 9, 0]);
        // brute force over both polyline edges
        let by_edge: Vec<Length> = l_shape.windows(2).map(|w| sampled_min(&s, &Segment3::new(w[0], w[1]).unwrap())).collect();
        assert_eq!(by_edge, vec![5, 10]);
        assert_eq!(l1_segment_polyline_distance(&s, &l_shape).unwrap(), 5);

        let on = seg([2, 0, 0], [6, 0, 0]);
        assert_eq!(l1_segment_polyline_distance(&on, &l_shape).unwrap(), 0);

        let single = [Point3::new(0, 3, 0), Point3::new(10, 3, 0)];
        let base = seg([0, 0, 0], [10, 0, 0]);
        assert_eq!(
            l1_segment_polyline_distance(&base, &single).unwrap(),
            l1_segment_distance(&base, &Segment3::new(single[0], single[1]).unwrap())
        );
        assert!(matches!(l1_segment_polyline_distance(&base, &single[..1]), Err(GeometryError::ShortPolyline(1))));
    }

    #[test]
    fn solid_obstacle_hits() {
        let o = Obstacle::solid(Box3::new(Point3::new(10, 10, 10), Point3::new(20, 20, 20)).unwrap(), 0);
        assert!(!segment_hits_obstacle(&seg([0, 0, 0], [5, 0, 0]), &o));
        assert!(segment_hits_obstacle(&seg([0, 15, 15], [30, 15, 15]), &o));
        // touching the face counts
        assert!(segment_hits_obstacle(&seg([0, 20, 15], [5, 20, 15]).with_end_x(10), &o));
        let inflated = Obstacle { clearance: 3, ..o.clone() };
        assert!(!segment_hits_obstacle(&seg([0, 24, 15], [30, 24, 15]), &inflated));
        assert!(segment_hits_obstacle(&seg([0, 23, 15], [30, 23, 15]), &inflated));
    }

    impl Segment3 {
        fn with_end_x(self, x: i64) -> Segment3 {
            Segment3::new(self.a, self.b.with_coord(0, x)).unwrap()
        }
    }

    #[test]
    fn wall_opening_passage() {
        // wall perpendicular to x, opening 20 wide in y and z
        let slab = Box3::new(Point3::new(100, 0, 0), Point3::new(110, 100, 100)).unwrap();
        let opening = Box3::new(Point3::new(100, 40, 40), Point3::new(110, 60, 60)).unwrap();
        let wall = Obstacle::wall(slab, vec![opening], 5);
        let through_center = seg([50, 50, 50], [150, 50, 50]);
        // sample the segment: every point inside the inflated slab must be
        // strictly inside the deflated opening cross-section
        let inflated = slab.inflate(5);
        let sampled_hit = (50..=150).any(|x| {
            let p = Point3::new(x, 50, 50);
            inflated.contains(&p) && !(45 < p.y && p.y < 55 && 45 < p.z && p.z < 55)
        });
        assert!(!sampled_hit);
        assert!(!segment_hits_obstacle(&through_center, &wall));
        // too close to the opening rim for the clearance
        assert!(segment_hits_obstacle(&seg([50, 44, 50], [150, 44, 50]), &wall));
        // through solid wall
        assert!(segment_hits_obstacle(&seg([50, 10, 10], [150, 10, 10]), &wall));
        // far away
        assert!(!segment_hits_obstacle(&seg([0, 10, 10], [40, 10, 10]), &wall));
        // running along the wall face outside the openings
        assert!(segment_hits_obstacle(&seg([112, 0, 10], [112, 90, 10]), &wall));
    }

    #[test]
    fn point_on_polyline_checks() {
        let pl = [Point3::new(0, 0, 0), Point3::new(10, 0, 0), Point3::new(10, 10, 0)];
        assert!(point_on_polyline(&Point3::new(4, 0, 0), &pl));
        assert!(point_on_polyline(&Point3::new(10, 7, 0), &pl));
        assert!(!point_on_polyline(&Point3::new(4, 1, 0), &pl));
    }

    #[test]
    fn point_serializes_as_triple() {
        let p = Point3::new(1, -2, 3);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1,-2,3]");
        assert_eq!(serde_json::from_str::<Point3>(&s).unwrap(), p);
    }
}
