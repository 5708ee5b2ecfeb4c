//! Workloads shared by the benchmarks.

use lanesafe_core::{build_scenario, run_with, QpProblem, ScenarioId};

/// Every QP the controller solves while running `id`.
pub fn recorded_problems(id: ScenarioId) -> Vec<QpProblem> {
    let mut out = Vec::new();
    run_with(&build_scenario(id), |p, _| out.push(p.clone())).expect("built-in scenario is valid");
    out
}
