//! Solve a generated instance and check the layout independently.

use std::time::Duration;

use wirelayr::engine::{solve_instance, Solution, SolveParams};
use wirelayr::synth::{generate, GeneratorParams};
use wirelayr::validate::{check_layout, BendGap};

fn main() {
    let inst = generate(&GeneratorParams { seed: 4, pipelines: 1, branches: 3, nodes: 5, delta: 5, ..Default::default() }).unwrap();
    let params = SolveParams { time_limit: Duration::from_secs(60), ..Default::default() };
    let out = solve_instance(&inst, &params);
    let r = &out.report;
    println!("{:?}: length {:?}, bound {:?}, {} nodes, {} lazy rows", r.status, r.objective, r.best_bound, r.nodes, r.lazy_rows);

    let layout = out.layout.expect("generated instances are feasible");
    let report = check_layout(&inst, &layout, BendGap::default());
    println!("violations {}, advisories {}, recomputed length {}", report.violations.len(), report.advisories.len(), report.total_length);
    assert!(report.is_empty());
    assert_eq!(report.total_length, layout.total_length);

    let json = Solution::new(Some(&layout), r).to_json_string();
    println!("solution JSON: {} bytes", json.len());
}
