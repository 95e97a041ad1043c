//! Write the full binary program of a small instance as MPS and LP.

use wirelayr::engine::Problem;
use wirelayr::milp::{write_lp, write_mps};
use wirelayr::synth::{generate, GeneratorParams};

fn main() {
    let inst = generate(&GeneratorParams { seed: 1, branches: 2, nodes: 3, delta: 3, ..Default::default() }).unwrap();
    let p = Problem::build(&inst).unwrap();
    let model = p.eager_model();
    println!(
        "{} columns, {} rows ({} of them safety rows)",
        model.num_columns(),
        model.constraints.len(),
        model.constraints.len() - p.model.constraints.len()
    );

    let mut mps = Vec::new();
    write_mps(&model, &mut mps).unwrap();
    let mut lp = Vec::new();
    write_lp(&model, &mut lp).unwrap();
    println!("MPS {} bytes, LP {} bytes", mps.len(), lp.len());
    for line in String::from_utf8(lp).unwrap().lines().take(6) {
        println!("{line}");
    }
}
