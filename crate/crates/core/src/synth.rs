//! Reproducible synthetic instances in the shape of the benchmark study.
//!
//! One or two pipelines run along y on the x ≤ 50 side of a cube. Each
//! pipeline feeds `branches` trees whose leaves sit on the far face x = cube.
//! A tree is a chain of intermediate boxes stepping monotonically from the
//! pipeline side towards its terminal. The
//! first boxes of one pipeline's branches are stacked over a shared tap
//! window, so their unconstrained shortest routes leave the pipeline close
//! together and have to be pulled apart by the safety rows.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagram::{Instance, InstanceMeta, Pipeline, TreeBuilder, INSTANCE_FORMAT};
use crate::geometry::{Box3, Length, Point3};

pub const MANIFEST_FORMAT: u32 = 1;

/// Pipelines start at (50, 0, z) and end at (50, 90, z).
pub const PIPELINE_X: i64 = 50;
pub const PIPELINE_Y_END: i64 = 90;
/// Nearest x a box may start at.
const BOX_X_MIN: i64 = 55;
const PLACEMENT_ATTEMPTS: usize = 400;
const CUBE_BUMP: i64 = 50;
const CUBE_BUMPS: usize = 4;
/// Branches sharing one tap window.
const STACK: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("could not place {what} without overlap after {PLACEMENT_ATTEMPTS} attempts")]
    PlacementOverflow { what: String },
    #[error("no route for pipeline {pipeline} at the required separation")]
    PipelineRouting { pipeline: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub seed: u64,
    pub cube: Length,
    pub pipelines: usize,
    pub branches: usize,
    /// Nodes per tree, root and leaves included.
    pub nodes: usize,
    pub region_edge: Length,
    pub delta: Length,
    pub min_bend_gap: Length,
    pub min_pipeline_separation: Length,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            seed: 0,
            cube: 100,
            pipelines: 1,
            branches: 1,
            nodes: 3,
            region_edge: 10,
            delta: 1,
            min_bend_gap: 10,
            min_pipeline_separation: 6,
        }
    }
}

impl GeneratorParams {
    fn check(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.into()));
        if !(1..=10).contains(&self.pipelines) {
            return bad("pipelines must be between 1 and 10");
        }
        if self.branches == 0 {
            return bad("branches must be at least 1");
        }
        if self.nodes < 2 {
            return bad("a tree needs at least a root and a leaf");
        }
        if self.delta < 0 || self.region_edge < 1 || self.min_bend_gap < 1 || self.min_pipeline_separation < 0 {
            return bad("negative or zero length parameter");
        }
        if self.cube < BOX_X_MIN + 2 * self.region_edge || self.cube <= PIPELINE_Y_END {
            return bad("cube too small for the pipeline layout");
        }
        Ok(())
    }

    /// Leaves per tree: larger trees fork into two terminals.
    pub fn leaves_per_tree(&self) -> usize {
        if self.nodes >= 10 {
            2
        } else {
            1
        }
    }
}

/// Coarse routing lattice with one random weight per unit step.
#[derive(Debug, Clone)]
pub struct CoarseGrid {
    pub xs: Vec<i64>,
    pub ys: Vec<i64>,
    pub zs: Vec<i64>,
    weights: Vec<i64>,
}

impl CoarseGrid {
    pub fn new(xs: Vec<i64>, ys: Vec<i64>, zs: Vec<i64>, rng: &mut impl Rng, max_extra: i64) -> Self {
        let n = xs.len() * ys.len() * zs.len() * 3;
        let weights = (0..n).map(|_| rng.gen_range(0..=max_extra)).collect();
        CoarseGrid { xs, ys, zs, weights }
    }

    fn dims(&self) -> [usize; 3] {
        [self.xs.len(), self.ys.len(), self.zs.len()]
    }

    fn num_vertices(&self) -> usize {
        self.xs.len() * self.ys.len() * self.zs.len()
    }

    fn id(&self, i: [usize; 3]) -> usize {
        (i[0] * self.ys.len() + i[1]) * self.zs.len() + i[2]
    }

    fn cell(&self, id: usize) -> [usize; 3] {
        let nz = self.zs.len();
        let ny = self.ys.len();
        [id / (ny * nz), (id / nz) % ny, id % nz]
    }

    pub fn point(&self, id: usize) -> Point3 {
        let [i, j, k] = self.cell(id);
        Point3::new(self.xs[i], self.ys[j], self.zs[k])
    }

    pub fn vertex(&self, p: Point3) -> Option<usize> {
        let i = self.xs.binary_search(&p.x).ok()?;
        let j = self.ys.binary_search(&p.y).ok()?;
        let k = self.zs.binary_search(&p.z).ok()?;
        Some(self.id([i, j, k]))
    }

    /// Neighbors of a vertex with the step cost: length scaled by
    /// (10 + weight) / 10, rounded up.
    pub fn neighbors(&self, id: usize) -> Vec<(usize, i64)> {
        let c = self.cell(id);
        let dims = self.dims();
        let mut out = Vec::with_capacity(6);
        for axis in 0..3 {
            for up in [false, true] {
                let mut n = c;
                if up {
                    if c[axis] + 1 >= dims[axis] {
                        continue;
                    }
                    n[axis] += 1;
                } else {
                    if c[axis] == 0 {
                        continue;
                    }
                    n[axis] -= 1;
                }
                let lo = if up { c } else { n };
                let nid = self.id(n);
                let len = self.point(id).l1(&self.point(nid));
                let w = self.weights[self.id(lo) * 3 + axis];
                out.push((nid, (len * (10 + w) + 9) / 10));
            }
        }
        out
    }
}

/// Cheapest vertex path between two lattice points, skipping steps for
/// which `blocked` holds. Ties go to the lower vertex id, so the result is
/// deterministic.
pub fn route_on_weighted_grid(
    grid: &CoarseGrid,
    from: Point3,
    to: Point3,
    blocked: impl Fn(Point3, Point3) -> bool,
) -> Option<(Vec<Point3>, i64)> {
    let (s, t) = (grid.vertex(from)?, grid.vertex(to)?);
    let n = grid.num_vertices();
    let mut dist = vec![i64::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0;
    heap.push(Reverse((0, s)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == t {
            break;
        }
        for (v, w) in grid.neighbors(u) {
            if blocked(grid.point(u), grid.point(v)) {
                continue;
            }
            let nd = d + w;
            if nd < dist[v] || (nd == dist[v] && u < prev[v]) {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    if dist[t] == i64::MAX {
        return None;
    }
    let mut path = vec![grid.point(t)];
    let mut v = t;
    while v != s {
        v = prev[v];
        path.push(grid.point(v));
    }
    path.reverse();
    Some((path, dist[t]))
}

/// Drop interior points where the direction does not change.
pub fn simplify_polyline(points: &[Point3]) -> Vec<Point3> {
    let mut out: Vec<Point3> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last() == Some(&p) {
            continue;
        }
        if out.len() >= 2 {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            let straight = (0..3).all(|k| {
                let (d1, d2) = (b.coord(k) - a.coord(k), p.coord(k) - b.coord(k));
                d1.signum() == d2.signum() || (d1 == 0 && d2 == 0)
            });
            if straight {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

fn polyline_box_distance(polyline: &[Point3], b: &Box3) -> Length {
    polyline
        .windows(2)
        .map(|w| Box3::spanning(w[0], w[1]).l1_distance(b))
        .chain(polyline.iter().map(|p| Box3::point(*p).l1_distance(b)))
        .min()
        .unwrap_or(Length::MAX)
}

fn route_pipelines(p: &GeneratorParams, rng: &mut ChaCha8Rng) -> Result<Vec<Pipeline>, SynthError> {
    let step = p.min_bend_gap;
    let levels: Vec<i64> = (0..=PIPELINE_Y_END / step).map(|k| k * step).collect();
    let mut zs = levels.clone();
    zs.shuffle(rng);
    zs.truncate(p.pipelines);
    if zs.len() < p.pipelines {
        return Err(SynthError::InvalidParams("more pipelines than z levels".into()));
    }
    let xs: Vec<i64> = (0..3).map(|k| PIPELINE_X - (2 - k) * step).filter(|&x| x >= 0).collect();
    let ends: Vec<(Point3, Point3)> =
        zs.iter().map(|&z| (Point3::new(PIPELINE_X, 0, z), Point3::new(PIPELINE_X, PIPELINE_Y_END, z))).collect();
    let sep = p.min_pipeline_separation;
    let mut routed: Vec<Vec<Point3>> = Vec::new();
    for (i, &(a, b)) in ends.iter().enumerate() {
        let pending: Vec<Point3> = ends[i + 1..].iter().flat_map(|&(s, t)| [s, t]).collect();
        let blocked = |u: Point3, v: Point3| {
            let seg = Box3::spanning(u, v);
            routed.iter().any(|r| polyline_box_distance(r, &seg) < sep) || pending.iter().any(|q| Box3::point(*q).l1_distance(&seg) < sep)
        };
        // each pipeline stays in its own z plane; detours go away from the trees
        let grid = CoarseGrid::new(xs.clone(), levels.clone(), vec![a.z], rng, 4);
        let (path, _) =
            route_on_weighted_grid(&grid, a, b, blocked).ok_or_else(|| SynthError::PipelineRouting { pipeline: format!("c{i}") })?;
        routed.push(simplify_polyline(&path));
    }
    Ok(routed.into_iter().enumerate().map(|(i, polyline)| Pipeline { id: format!("c{i}"), polyline }).collect())
}

struct Packer<'a> {
    cube: Length,
    edge: Length,
    boxes: Vec<Box3>,
    leaves: Vec<Point3>,
    pipelines: &'a [Pipeline],
    leaf_gap: Length,
}

impl Packer<'_> {
    fn free(&self, b: &Box3) -> bool {
        self.boxes.iter().all(|o| o.l1_distance(b) >= 1) && self.pipelines.iter().all(|c| polyline_box_distance(&c.polyline, b) >= 1)
    }

    fn boxed(&self, min: Point3) -> Box3 {
        let e = self.edge;
        Box3::spanning(min, Point3::new(min.x + e, min.y + e, min.z + e))
    }

    fn take(&mut self, min: Point3) -> Option<Box3> {
        let b = self.boxed(min);
        self.free(&b).then(|| {
            self.boxes.push(b);
            b
        })
    }

    /// Next box of a chain, one edge plus a little further along x, along y
    /// towards `toward`, or along z in direction `zdir`. Chains never turn
    /// back, so consecutive connections do not retrace each other.
    fn place_step(&mut self, rng: &mut ChaCha8Rng, prev: Box3, toward: i64, zdir: i64, what: &str) -> Result<Box3, SynthError> {
        let e = self.edge;
        // largest min corner per axis; boxes stay one edge clear of the
        // terminal face
        let top = [self.cube - 2 * e, self.cube - e, self.cube - e];
        let ydir = if toward > prev.min.y + e / 2 { 1 } else { -1 };
        let dirs = [1, ydir, zdir];
        for attempt in 0..PLACEMENT_ATTEMPTS {
            let w = (attempt / 16) as i64;
            let room = |k: usize| {
                let next = prev.min.coord(k) + dirs[k] * (e + 1);
                (0..=top[k]).contains(&next)
            };
            let mut axes: Vec<usize> = Vec::new();
            if room(0) {
                axes.push(0);
            }
            if room(1) && (toward - prev.min.y - e / 2).abs() > e {
                axes.push(1);
            }
            if axes.is_empty() || attempt >= PLACEMENT_ATTEMPTS / 2 {
                axes.extend((1..3).filter(|&k| room(k)));
            }
            let Some(&axis) = axes.choose(rng) else { break };
            let mut min = prev.min;
            for k in 0..3 {
                let v = if k == axis {
                    min.coord(k) + dirs[k] * (e + 1 + rng.gen_range(0..=2 + w))
                } else {
                    min.coord(k) + rng.gen_range(-w.min(e)..=w.min(e))
                };
                min = min.with_coord(k, v.clamp(0, top[k]));
            }
            if let Some(b) = self.take(min) {
                return Ok(b);
            }
        }
        Err(SynthError::PlacementOverflow { what: what.into() })
    }

    /// First box of a chain at `min`, nudged within the plane if taken.
    fn place_first(&mut self, rng: &mut ChaCha8Rng, min: Point3, what: &str) -> Result<Box3, SynthError> {
        let e = self.edge;
        for attempt in 0..PLACEMENT_ATTEMPTS {
            let w = (attempt / 8) as i64;
            let m = Point3::new(
                (min.x + rng.gen_range(0..=w)).min(self.cube - 2 * e),
                (min.y + rng.gen_range(-w..=w)).clamp(0, self.cube - e),
                min.z,
            );
            if let Some(b) = self.take(m) {
                return Ok(b);
            }
        }
        Err(SynthError::PlacementOverflow { what: what.into() })
    }

    fn place_leaf(&mut self, rng: &mut ChaCha8Rng, y: i64, z: i64, what: &str) -> Result<Point3, SynthError> {
        for attempt in 0..PLACEMENT_ATTEMPTS {
            let w = attempt as i64 / 4;
            let p =
                Point3::new(self.cube, (y + rng.gen_range(-w..=w)).clamp(0, self.cube), (z + rng.gen_range(-w..=w)).clamp(0, self.cube));
            if self.leaves.iter().all(|q| q.l1(&p) >= self.leaf_gap) && self.boxes.iter().all(|b| !b.contains(&p)) {
                self.leaves.push(p);
                return Ok(p);
            }
        }
        Err(SynthError::PlacementOverflow { what: what.into() })
    }
}

/// Sorted window positions in `0..=hi`, pairwise at least `gap` apart.
fn draw_windows(rng: &mut ChaCha8Rng, n: usize, gap: Length, hi: i64, pipeline: &str) -> Result<Vec<i64>, SynthError> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut w: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=hi)).collect();
        w.sort_unstable();
        if w.windows(2).all(|p| p[1] - p[0] >= gap) {
            return Ok(w);
        }
    }
    Err(SynthError::PlacementOverflow { what: format!("tap windows of {pipeline}") })
}

pub fn generate(p: &GeneratorParams) -> Result<Instance, SynthError> {
    p.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let pipelines = route_pipelines(p, &mut rng)?;
    let edge = p.region_edge;
    let mut pack = Packer {
        cube: p.cube,
        edge,
        boxes: vec![],
        leaves: vec![],
        pipelines: &pipelines,
        leaf_gap: (2 * p.delta + 1).max(p.min_bend_gap),
    };

    let leaves = p.leaves_per_tree();
    let chain = p.nodes - 1 - leaves.min(p.nodes - 1);
    let leaves = p.nodes - 1 - chain;
    let mut trees = Vec::new();
    for c in &pipelines {
        let zc = c.polyline[0].z;
        // up to STACK branches share a tap window and stack away from the
        // pipeline plane, one box height plus one unit apart
        let windows = draw_windows(&mut rng, p.branches.div_ceil(STACK), 2 * edge, PIPELINE_Y_END - edge, &c.id)?;
        let up = 2 * zc < p.cube;
        for j in 0..p.branches {
            let tid = format!("{}b{j}", c.id);
            let root = format!("{tid}r");
            let y0 = windows[j / STACK];
            let lift = (j % STACK) as i64 * (edge + 1);
            let (plane, z_min) = if up { (zc + lift, zc + lift) } else { (zc - lift, zc - lift - edge) };
            let target = rng.gen_range(0..=p.cube);
            let zdir = if up { 1 } else { -1 };
            let mut builder = TreeBuilder::new(&tid, &c.id, &root);
            let mut parent = root;
            let mut level = plane;
            let mut prev: Option<Box3> = None;
            for i in 0..chain {
                let id = format!("{tid}v{i}");
                let b = match prev {
                    None => pack.place_first(&mut rng, Point3::new(BOX_X_MIN, y0, z_min), &id)?,
                    Some(q) => pack.place_step(&mut rng, q, target, zdir, &id)?,
                };
                level = if up { b.min.z } else { b.max.z };
                builder = builder.intermediate(&parent, &id, b);
                parent = id;
                prev = Some(b);
            }
            for k in 0..leaves {
                let id = format!("{tid}l{k}");
                let dy = k as i64 * edge;
                let pt = pack.place_leaf(&mut rng, (target + dy).min(p.cube), level.clamp(0, p.cube), &id)?;
                builder = builder.leaf(&parent, &id, pt);
            }
            trees.push(builder.build());
        }
    }

    Ok(Instance {
        format: INSTANCE_FORMAT,
        region: Box3::spanning(Point3::new(0, 0, 0), Point3::new(p.cube, p.cube, p.cube)),
        pipelines,
        trees,
        obstacles: vec![],
        delta: p.delta,
        pipeline_clearance: Some(p.delta),
        meta: InstanceMeta { seed: Some(p.seed), generator_params: serde_json::to_value(p).ok() },
    })
}

/// Cartesian grid of benchmark cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub pipelines: Vec<usize>,
    pub branches: Vec<usize>,
    pub nodes: Vec<usize>,
    pub deltas: Vec<Length>,
    pub per_cell: usize,
    pub base_seed: u64,
    pub cube: Length,
}

impl SuiteSpec {
    /// The full study grid: 72 cells.
    pub fn table1(per_cell: usize) -> Self {
        SuiteSpec {
            pipelines: vec![1, 2],
            branches: vec![1, 3, 5],
            nodes: vec![3, 5, 10, 15],
            deltas: vec![1, 3, 5],
            per_cell,
            base_seed: 1,
            cube: 100,
        }
    }

    pub fn cells(&self) -> Vec<(usize, usize, usize, Length)> {
        let mut out = Vec::new();
        for &c in &self.pipelines {
            for &b in &self.branches {
                for &n in &self.nodes {
                    for &d in &self.deltas {
                        out.push((c, b, n, d));
                    }
                }
            }
        }
        out
    }

    /// Parameters of every instance, seeds distinct and in cell order.
    pub fn params(&self) -> Vec<GeneratorParams> {
        let mut seed = self.base_seed;
        let mut out = Vec::new();
        for (c, b, n, d) in self.cells() {
            for _ in 0..self.per_cell {
                out.push(GeneratorParams {
                    seed,
                    cube: self.cube,
                    pipelines: c,
                    branches: b,
                    nodes: n,
                    delta: d,
                    ..GeneratorParams::default()
                });
                seed += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub pipelines: usize,
    pub branches: usize,
    pub nodes: usize,
    pub delta: Length,
    pub seed: u64,
    pub cube: Length,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub format: u32,
    pub entries: Vec<ManifestEntry>,
}

impl SuiteManifest {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path).map_err(|source| SynthError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| SynthError::Manifest { path: path.into(), source })
    }
}

/// Generate with the given parameters, enlarging the cube when the boxes do
/// not fit.
pub fn generate_fitting(p: &GeneratorParams) -> Result<Instance, SynthError> {
    let mut q = p.clone();
    for _ in 0..CUBE_BUMPS {
        match generate(&q) {
            Err(SynthError::PlacementOverflow { .. }) => q.cube += CUBE_BUMP,
            other => return other,
        }
    }
    generate(&q)
}

pub fn instance_file_name(p: &GeneratorParams) -> String {
    format!("c{}_b{}_n{}_d{}_s{}.json", p.pipelines, p.branches, p.nodes, p.delta, p.seed)
}

/// Write every instance of the suite plus `manifest.json` into `dir`.
pub fn generate_suite(spec: &SuiteSpec, dir: &Path) -> Result<SuiteManifest, SynthError> {
    fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.into(), source })?;
    let entries = spec
        .params()
        .par_iter()
        .map(|p| {
            let inst = generate_fitting(p)?;
            let file = instance_file_name(p);
            let path = dir.join(&file);
            fs::write(&path, inst.to_json_string()).map_err(|source| SynthError::Io { path, source })?;
            let cube = inst.region.max.x;
            Ok(ManifestEntry { file, pipelines: p.pipelines, branches: p.branches, nodes: p.nodes, delta: p.delta, seed: p.seed, cube })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let manifest = SuiteManifest { format: MANIFEST_FORMAT, entries };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|source| SynthError::Io { path, source })?;
    Ok(manifest)
}
