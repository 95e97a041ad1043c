//! Safety rows found on demand versus all of them up front: same optimum,
//! far fewer rows.

use wirelayr::engine::{Problem, SolveParams};
use wirelayr::synth::{generate, GeneratorParams};

fn main() {
    for seed in 0..4 {
        let inst = generate(&GeneratorParams { seed, branches: 3, nodes: 5, delta: 3, ..Default::default() }).unwrap();
        let p = Problem::build(&inst).unwrap();
        let lazy = p.solve(&SolveParams::default());
        let eager = p.solve(&SolveParams { eager: true, ..Default::default() });
        println!(
            "seed {seed}: lazy {:?} with {} rows, eager {:?} with {} rows",
            lazy.report.objective, lazy.report.lazy_rows, eager.report.objective, eager.report.eager_rows
        );
        assert_eq!(lazy.report.objective, eager.report.objective);
        let values = p.model_with(&lazy.lazy_rows);
        println!("  core + lazy model: {} rows", values.constraints.len());
    }
}
