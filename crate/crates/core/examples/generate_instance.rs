//! Generate one synthetic instance and summarize its trees.
//!
//! cargo run --example generate_instance -- [seed] [pipelines] [branches] [nodes]

use wirelayr::diagram::{tree_statistics, validate_instance};
use wirelayr::synth::{generate_fitting, GeneratorParams};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, d: u64| args.get(i).copied().unwrap_or(d);
    let p = GeneratorParams {
        seed: arg(0, 7),
        pipelines: arg(1, 2) as usize,
        branches: arg(2, 3) as usize,
        nodes: arg(3, 5) as usize,
        delta: 3,
        ..Default::default()
    };
    let inst = generate_fitting(&p).expect("parameters fit the cube");
    println!("cube {:?}..{:?}, delta {}", inst.region.min, inst.region.max, inst.delta);
    for pl in &inst.pipelines {
        println!("pipeline {}: {} bends, length {}", pl.id, pl.polyline.len() - 2, pl.length());
    }
    for (id, s) in tree_statistics(&inst) {
        println!("tree {id}: {s:?}");
    }
    assert!(validate_instance(&inst).is_empty());
    println!("{} bytes of JSON", inst.to_json_string().len());
}
