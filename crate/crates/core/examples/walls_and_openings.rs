//! A branch that reaches its pump through the only opening of a wall and
//! climbs over a valve box sitting just behind it. Grid lines come from the
//! regions and terminals only, so the opening has to contain some of them.

use wirelayr::diagram::{Instance, InstanceMeta, Pipeline, TreeBuilder, INSTANCE_FORMAT};
use wirelayr::engine::{solve_instance, SolveParams};
use wirelayr::geometry::{Box3, Obstacle, Point3};
use wirelayr::validate::{check_layout, BendGap};

fn b(min: [i64; 3], max: [i64; 3]) -> Box3 {
    Box3::new(min.into(), max.into()).unwrap()
}

fn main() {
    let tree = TreeBuilder::new("t", "c", "r")
        .intermediate("r", "valve", b([5, 0, 0], [10, 5, 2]))
        .leaf("valve", "pump", Point3::new(40, 33, 0))
        .build();
    let wall = Obstacle::wall(b([20, -10, -10], [22, 50, 10]), vec![b([20, 30, -2], [22, 36, 4])], 0);
    let valve_box = Obstacle::solid(b([26, 30, -4], [30, 36, 0]), 1);
    let inst = Instance {
        format: INSTANCE_FORMAT,
        region: b([-20, -20, -20], [60, 60, 60]),
        pipelines: vec![Pipeline { id: "c".into(), polyline: vec![Point3::new(0, 0, 0), Point3::new(0, 40, 0)] }],
        trees: vec![tree],
        obstacles: vec![wall, valve_box],
        delta: 2,
        pipeline_clearance: Some(2),
        meta: InstanceMeta::default(),
    };

    let out = solve_instance(&inst, &SolveParams::default());
    println!("status {:?}, length {:?}", out.report.status, out.report.objective);
    let layout = out.layout.expect("the opening admits a route");
    for p in &layout.paths {
        let pts: Vec<String> = p.vertices.iter().map(|v| format!("({},{},{})", v.x, v.y, v.z)).collect();
        println!("{} -> {}: {}", p.parent, p.child, pts.join(" "));
    }
    let report = check_layout(&inst, &layout, BendGap::default());
    println!("violations: {}", report.violations.len());

    // Closing the opening leaves no way through.
    let mut sealed = inst.clone();
    sealed.obstacles[0] = Obstacle::solid(b([20, -20, -20], [22, 60, 60]), 0);
    let out = solve_instance(&sealed, &SolveParams::default());
    println!("sealed wall: {:?} ({})", out.report.status, out.report.certificate.unwrap_or_default());
}
