//! The eager model handed to a general-purpose MILP solver must reach the
//! same optimum as the combinatorial search.

mod common;

use std::time::Duration;

use microlp::{ComparisonOp, OptimizationDirection, Problem as Lp};

use common::tiny_instance;
use wirelayr::engine::{solve_instance, Problem, SolveParams, SolveStatus};
use wirelayr::milp::{MilpModel, Sense};

/// `None` when the model is infeasible.
fn solve_with_microlp(model: &MilpModel) -> Option<i64> {
    let mut lp = Lp::new(OptimizationDirection::Minimize);
    let mut cost = vec![0.0; model.num_columns()];
    for &(c, k) in &model.objective {
        cost[c as usize] += k as f64;
    }
    let vars: Vec<_> = cost.iter().map(|&c| lp.add_binary_var(c)).collect();
    for row in &model.constraints {
        let terms: Vec<_> = row.terms.iter().map(|&(c, k)| (vars[c as usize], k as f64)).collect();
        let op = match row.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Eq => ComparisonOp::Eq,
            Sense::Ge => ComparisonOp::Ge,
        };
        lp.add_constraint(terms.as_slice(), op, row.rhs as f64);
    }
    match lp.solve() {
        Ok(out) => {
            let sol = out.into_solution().expect("no limits set");
            let x: Vec<bool> = vars.iter().map(|&v| sol.var_value(v) > 0.5).collect();
            assert!(model.violated_rows(&x).is_empty(), "microlp returned an infeasible point");
            Some(model.objective_value(&x))
        }
        Err(microlp::Error::Infeasible) => None,
        Err(e) => panic!("microlp: {e:?}"),
    }
}

#[test]
fn eager_model_optimum_matches_engine() {
    let mut checked = 0;
    for seed in 0..40 {
        let inst = tiny_instance(seed);
        let Ok(p) = Problem::build(&inst) else { continue };
        let model = p.eager_model();
        if model.num_columns() > 400 {
            continue;
        }
        let engine = solve_instance(&inst, &SolveParams { time_limit: Duration::from_secs(30), ..Default::default() });
        assert!(matches!(engine.report.status, SolveStatus::Optimal | SolveStatus::Infeasible));
        assert_eq!(solve_with_microlp(&model), engine.report.objective, "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} models small enough");
}
