//! Benchmark harness over a generated suite.
//!
//! Instances are solved independently, each on one worker, several at a
//! time. Records are merged by cell then seed, so the CSV row order does
//! not depend on scheduling. Only the timing columns vary between runs.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagram::{FormatError, Instance};
use crate::engine::{solve_instance, SolveParams, SolveStatus};
use crate::geometry::Length;
use crate::synth::{ManifestEntry, SuiteManifest};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Instance { path: PathBuf, source: FormatError },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub time_limit: Duration,
    pub seed: u64,
    /// Instances solved at once.
    pub jobs: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams { time_limit: Duration::from_secs(60), seed: 0, jobs: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub c: usize,
    pub b: usize,
    pub n: usize,
    pub delta: Length,
}

impl CellRecord {
    pub fn cell(&self) -> Cell {
        Cell { c: self.c, b: self.b, n: self.n, delta: self.delta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub c: usize,
    pub b: usize,
    pub n: usize,
    pub delta: Length,
    pub seed: u64,
    pub file: String,
    pub status: SolveStatus,
    pub objective: Option<Length>,
    pub time: f64,
    pub nodes: u64,
    pub lazy_rows: usize,
}

impl InstanceRecord {
    pub fn cell(&self) -> Cell {
        Cell { c: self.c, b: self.b, n: self.n, delta: self.delta }
    }

    pub fn feasible(&self) -> bool {
        self.objective.is_some()
    }
}

/// One row of the per-cell table: mean time over the instances solved to
/// optimality and the number with a feasible layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub c: usize,
    pub b: usize,
    pub n: usize,
    pub delta: Length,
    pub time: Option<f64>,
    pub feas: usize,
    pub instances: usize,
    pub optimal: usize,
    pub median_time: Option<f64>,
    pub mean_nodes: f64,
    pub mean_lazy_rows: f64,
}

pub const INSTANCE_COLUMNS: [&str; 11] = ["c", "b", "n", "delta", "seed", "file", "status", "objective", "time", "nodes", "lazy_rows"];
pub const CELL_COLUMNS: [&str; 11] =
    ["c", "b", "n", "delta", "time", "feas", "instances", "optimal", "median_time", "mean_nodes", "mean_lazy_rows"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub instances: Vec<InstanceRecord>,
    pub cells: Vec<CellRecord>,
}

pub fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[m] } else { (xs[m - 1] + xs[m]) / 2.0 })
}

/// Cell rows from instance rows, ordered by cell.
pub fn aggregate(records: &[InstanceRecord]) -> Vec<CellRecord> {
    let mut sorted: Vec<&InstanceRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.cell(), r.seed));
    sorted
        .chunk_by(|a, b| a.cell() == b.cell())
        .map(|group| {
            let k = group.len() as f64;
            let mut solved: Vec<f64> = group.iter().filter(|r| r.status == SolveStatus::Optimal).map(|r| r.time).collect();
            let time = (!solved.is_empty()).then(|| solved.iter().sum::<f64>() / solved.len() as f64);
            let Cell { c, b, n, delta } = group[0].cell();
            CellRecord {
                c,
                b,
                n,
                delta,
                time,
                feas: group.iter().filter(|r| r.feasible()).count(),
                instances: group.len(),
                optimal: solved.len(),
                median_time: median(&mut solved),
                mean_nodes: group.iter().map(|r| r.nodes as f64).sum::<f64>() / k,
                mean_lazy_rows: group.iter().map(|r| r.lazy_rows as f64).sum::<f64>() / k,
            }
        })
        .collect()
}

fn solve_entry(dir: &Path, e: &ManifestEntry, params: &BenchParams) -> Result<InstanceRecord, BenchError> {
    let path = dir.join(&e.file);
    let text = fs::read_to_string(&path).map_err(|source| BenchError::Io { path: path.clone(), source })?;
    let inst = Instance::from_json_str(&text).map_err(|source| BenchError::Instance { path, source })?;
    let sp = SolveParams { time_limit: params.time_limit, threads: 1, seed: params.seed, ..Default::default() };
    let out = solve_instance(&inst, &sp);
    Ok(InstanceRecord {
        c: e.pipelines,
        b: e.branches,
        n: e.nodes,
        delta: e.delta,
        seed: e.seed,
        file: e.file.clone(),
        status: out.report.status,
        objective: out.report.objective,
        time: out.report.wall_time.as_secs_f64(),
        nodes: out.report.nodes,
        lazy_rows: out.report.lazy_rows,
    })
}

/// Solve every manifest entry; instance files are resolved against `dir`.
pub fn run_bench(manifest: &SuiteManifest, dir: &Path, params: &BenchParams) -> Result<BenchResult, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(params.jobs.max(1)).build()?;
    let mut instances = pool.install(|| manifest.entries.par_iter().map(|e| solve_entry(dir, e, params)).collect::<Result<Vec<_>, _>>())?;
    instances.sort_by_key(|r| (r.cell(), r.seed));
    let cells = aggregate(&instances);
    Ok(BenchResult { instances, cells })
}

fn write_rows<W: Write, T: Serialize>(header: &[&str], rows: &[T], w: W) -> io::Result<()> {
    // header written by hand so an empty table still has one
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(header)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()
}

pub fn write_cells_csv<W: Write>(cells: &[CellRecord], w: W) -> io::Result<()> {
    write_rows(&CELL_COLUMNS, cells, w)
}

pub fn write_instances_csv<W: Write>(records: &[InstanceRecord], w: W) -> io::Result<()> {
    write_rows(&INSTANCE_COLUMNS, records, w)
}
