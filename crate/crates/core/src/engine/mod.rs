//! Exact solver for the binary program built by [`crate::milp`].
//!
//! Best-first branch-and-bound whose relaxation drops every safety row and
//! corridor-exclusivity row. The relaxation splits per tree and is solved
//! exactly by a tree DP over shortest paths. An integral candidate is
//! scanned against the conflict catalog; violated rows are materialized
//! lazily and the search branches on one conflict, giving each child a ban
//! that removes one side of it. The first conflict-free candidate popped
//! from the queue is optimal.

mod layout;
mod relax;
mod search;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use layout::{extract_layout, EdgePath, ExtractError, Layout, Solution, SOLUTION_FORMAT};
pub use search::{lower_bound, SearchNode};

use crate::diagram::Instance;
use crate::gridgen::{assemble_forest, GridError, GridGraph};
use crate::milp::{build_conflict_catalog, build_core_model, ConflictCatalog, LinearConstraint, MilpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: Option<i64>,
    pub best_bound: Option<i64>,
    pub gap: Option<f64>,
    pub lazy_rows: usize,
    /// Catalog rows present from the start (eager mode only).
    pub eager_rows: usize,
    pub nodes: u64,
    pub workers: usize,
    /// Why the instance is infeasible, when it is.
    pub certificate: Option<String>,
    /// Left out of serialized output so that solutions are reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SolveReport {
    pub(crate) fn finish(&mut self) {
        self.gap = match (self.objective, self.best_bound) {
            (Some(o), Some(b)) => Some((o - b) as f64 / o.max(1) as f64),
            _ => None,
        };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    pub time_limit: Duration,
    pub threads: usize,
    pub seed: u64,
    /// Materialize every catalog row up front instead of on violation.
    pub eager: bool,
    /// Stop after this many branch-and-bound nodes.
    pub node_limit: Option<u64>,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { time_limit: Duration::from_secs(3600), threads: 1, seed: 0, eager: false, node_limit: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub layout: Option<Layout>,
    pub report: SolveReport,
    /// Safety rows materialized during the search, in order of discovery.
    pub lazy_rows: Vec<LinearConstraint>,
}

/// Everything the engine needs about one instance, built once.
pub struct Problem<'a> {
    pub inst: &'a Instance,
    pub graphs: Vec<GridGraph>,
    pub model: MilpModel,
    pub catalog: ConflictCatalog,
}

impl<'a> Problem<'a> {
    pub fn build(inst: &'a Instance) -> Result<Problem<'a>, GridError> {
        let graphs = assemble_forest(inst)?;
        let model = build_core_model(inst, &graphs);
        let catalog = build_conflict_catalog(inst, &graphs);
        Ok(Problem { inst, graphs, model, catalog })
    }

    pub fn solve(&self, params: &SolveParams) -> SolveOutcome {
        search::run(self, params)
    }

    /// Core model plus the given safety rows.
    pub fn model_with(&self, rows: &[LinearConstraint]) -> MilpModel {
        let mut m = self.model.clone();
        m.constraints.extend_from_slice(rows);
        m
    }

    /// Core model with every catalog row materialized.
    pub fn eager_model(&self) -> MilpModel {
        self.model_with(&self.catalog.all_rows(&self.model.index, &self.model.big_m))
    }
}

/// Discretize, build and solve in one call; the reported wall time covers
/// all of it. A discretization failure that proves infeasibility is reported
/// as an infeasible outcome.
pub fn solve_instance(inst: &Instance, params: &SolveParams) -> SolveOutcome {
    let start = Instant::now();
    match Problem::build(inst) {
        Ok(p) => {
            let mut out = p.solve(params);
            out.report.wall_time = start.elapsed();
            out
        }
        Err(e) => {
            let mut report = SolveReport {
                status: SolveStatus::Infeasible,
                objective: None,
                best_bound: None,
                gap: None,
                lazy_rows: 0,
                eager_rows: 0,
                nodes: 0,
                workers: params.threads.max(1),
                certificate: Some(e.to_string()),
                wall_time: start.elapsed(),
            };
            report.finish();
            SolveOutcome { layout: None, report, lazy_rows: vec![] }
        }
    }
}
