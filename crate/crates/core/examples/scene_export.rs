//! Export an instance and its layout as an OBJ scene and a segment table.

use std::fs::File;

use wirelayr::engine::{solve_instance, SolveParams};
use wirelayr::scene::{export_scene, scene_segments, EntityKind, SceneFormat};
use wirelayr::synth::{generate, GeneratorParams};

fn main() {
    let inst = generate(&GeneratorParams { seed: 2, pipelines: 2, branches: 2, nodes: 3, delta: 1, ..Default::default() }).unwrap();
    let layout = solve_instance(&inst, &SolveParams::default()).layout;
    let dir = std::env::temp_dir();
    for (format, name) in [(SceneFormat::ObjPolylines, "wirelayr_scene.obj"), (SceneFormat::CsvSegments, "wirelayr_scene.csv")] {
        let path = dir.join(name);
        export_scene(&inst, layout.as_ref(), format, File::create(&path).unwrap()).unwrap();
        println!("wrote {}", path.display());
    }
    let rows = scene_segments(&inst, layout.as_ref());
    let branch: i64 = rows.iter().filter(|r| r.kind == EntityKind::Branch).map(|r| r.length).sum();
    println!("{} segments; branch length {} = objective {:?}", rows.len(), branch, layout.map(|l| l.total_length));
}
