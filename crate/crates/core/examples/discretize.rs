//! Build the per-tree grid graphs of a small instance and compare the model
//! size with its closed-form count.

use wirelayr::gridgen::assemble_forest;
use wirelayr::milp::{build_conflict_catalog, build_core_model, expected_size};
use wirelayr::synth::{generate, GeneratorParams};

fn main() {
    let inst = generate(&GeneratorParams { seed: 11, branches: 3, nodes: 5, delta: 3, ..Default::default() }).unwrap();
    let graphs = assemble_forest(&inst).unwrap();
    for (tree, g) in inst.trees.iter().zip(&graphs) {
        let sets: Vec<usize> = g.admissible.iter().map(Vec::len).collect();
        println!("{}: {} vertices, {} arcs, admissible set sizes {:?}", tree.id, g.vertices.len(), g.arcs.len(), sets);
    }
    let model = build_core_model(&inst, &graphs);
    let size = expected_size(&inst, &graphs);
    println!(
        "columns {} (expected {}), core rows {} (expected {})",
        model.num_columns(),
        size.columns(),
        model.constraints.len(),
        size.rows
    );
    for (family, n) in model.family_counts() {
        println!("  {family:?}: {n}");
    }
    let catalog = build_conflict_catalog(&inst, &graphs);
    println!("conflicting arc pairs at delta {}: {}", inst.delta, catalog.num_pairs());
}
