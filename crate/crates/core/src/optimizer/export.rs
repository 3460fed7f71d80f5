use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{Diagnostics, SolveStatus, TrajectorySolution};
use crate::model::RobotModel;
use crate::singularity::manipulability;

#[derive(Serialize)]
struct SolutionDocument<'a> {
    #[serde(rename = "t_F")]
    t_f: f64,
    status: SolveStatus,
    states: &'a [Vec<f64>],
    inputs: &'a [Vec<f64>],
    diagnostics: &'a Diagnostics,
}

pub fn solution_to_json(sol: &TrajectorySolution) -> String {
    let doc = SolutionDocument {
        t_f: sol.t_f,
        status: sol.status,
        states: &sol.states,
        inputs: &sol.inputs,
        diagnostics: &sol.diagnostics,
    };
    serde_json::to_string_pretty(&doc).expect("solution serializes")
}

/// One row per grid point: `t, q1…qM, dq1…dqM, v1…vM, m`.
pub fn solution_to_csv(model: &RobotModel, sol: &TrajectorySolution) -> String {
    let m = model.dof;
    let mut out = String::from("t");
    for prefix in ["q", "dq", "v"] {
        for j in 1..=m {
            write!(out, ",{prefix}{j}").unwrap();
        }
    }
    out.push_str(",m\n");
    for (k, t) in sol.grid_times().into_iter().enumerate() {
        write!(out, "{t}").unwrap();
        for v in sol.states[k].iter().chain(&sol.inputs[k]) {
            write!(out, ",{v}").unwrap();
        }
        let mq = manipulability(model, sol.q(k)).map_or(f64::NAN, |v| v);
        writeln!(out, ",{mq}").unwrap();
    }
    out
}

pub fn write_solution_json(path: impl AsRef<Path>, sol: &TrajectorySolution) -> std::io::Result<()> {
    std::fs::write(path, solution_to_json(sol))
}

pub fn write_solution_csv(
    path: impl AsRef<Path>,
    model: &RobotModel,
    sol: &TrajectorySolution,
) -> std::io::Result<()> {
    std::fs::write(path, solution_to_csv(model, sol))
}
