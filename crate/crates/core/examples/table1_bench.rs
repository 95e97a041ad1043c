//! A small slice of the benchmark grid, tabulated per cell.

use std::time::Duration;

use wirelayr::bench::{run_bench, write_cells_csv, BenchParams};
use wirelayr::synth::{generate_suite, SuiteSpec};

fn main() {
    let dir = std::env::temp_dir().join("wirelayr_table1_bench");
    let spec = SuiteSpec {
        pipelines: vec![1],
        branches: vec![1, 3],
        nodes: vec![3, 5],
        deltas: vec![1, 3, 5],
        per_cell: 3,
        base_seed: 0,
        cube: 100,
    };
    let manifest = generate_suite(&spec, &dir).unwrap();
    let params = BenchParams { time_limit: Duration::from_secs(60), seed: 0, jobs: 2 };
    let result = run_bench(&manifest, &dir, &params).unwrap();
    write_cells_csv(&result.cells, std::io::stdout().lock()).unwrap();
}
