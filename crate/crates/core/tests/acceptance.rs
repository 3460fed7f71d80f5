//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits with status 1 if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use singplan::bench::{records_to_csv, run_benchmark, BenchmarkConfig, BenchmarkRun};
use singplan::cost::{cost_gradient, potential, singularity_cost};
use singplan::singularity::{
    cauchy_binet_det, isolated_rank_blocks, verify_symbolic, SINGULAR_M_THRESHOLD,
};
use singplan::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, budget_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < budget_s, format!("{s:.2}s of {budget_s}s"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for family in [RobotFamily::Comau, RobotFamily::Iiwa] {
        let model = shipped_model(family);
        let check = verify_symbolic(&model, 1000, 7).expect("closed form available");
        pass &= check.max_relative_error <= 1e-9;
        parts.push(format!("{} max rel err {:.2e}", model.name, check.max_relative_error));
    }
    let (fast, t) = within(start.elapsed(), 10.0);
    outcome(pass && fast, format!("{}; {t}", parts.join(", ")))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(2);
    let mut pass = true;
    let mut wrist = Vec::new();
    let mut violations = Vec::new();
    let mut count = 0;
    for model in shipped_models() {
        for cond in &model.singularity_conditions {
            count += 1;
            let samples: Vec<Vec<f64>> = (0..100).map(|_| common::on_manifold(&model, cond, &mut rng)).collect();
            // conditions whose manifold zeroes the wrist block are the J22-derived ones
            let j22_derived = samples.iter().all(|q| {
                isolated_rank_blocks(&model, q)
                    .map(|b| b.j22.determinant().abs() <= 1e-12)
                    .unwrap_or(false)
            });
            let bad: Vec<(usize, f64)> = samples
                .iter()
                .enumerate()
                .map(|(i, q)| (i, manipulability(&model, q).unwrap()))
                .filter(|&(_, m)| m > SINGULAR_M_THRESHOLD)
                .collect();
            for (i, m) in &bad {
                violations.push(format!("{} sample {i}: m = {m:.3e}", cond.id));
            }
            if j22_derived {
                wrist.push(cond.id.clone());
                pass &= bad.len() <= 5;
            } else {
                pass &= bad.is_empty();
            }
        }
    }
    for v in &violations {
        println!("    violation: {v}");
    }
    let (fast, t) = within(start.elapsed(), 30.0);
    outcome(
        pass && fast,
        format!(
            "{count} conditions x 100 samples, wrist-block conditions [{}], {} violations; {t}",
            wrist.join(", "),
            violations.len()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-2.0..2.0));
        let det = (&a * a.transpose()).determinant();
        let minors = cauchy_binet_det(&a).unwrap();
        worst = worst.max((minors - det).abs() / det.abs().max(1.0));
    }
    let (fast, t) = within(start.elapsed(), 1.0);
    outcome(worst <= 1e-12 && fast, format!("max scaled error {worst:.2e}; {t}"))
}

/// Five-point central difference; its O(h⁴) error stays small where the
/// manipulability cost bends sharply close to a singularity.
fn fd_gradient(model: &RobotModel, q: &[f64], p: &SingularityObjectiveParams, h: f64) -> Vec<f64> {
    (0..q.len())
        .map(|j| {
            let f = |d: f64| {
                let mut x = q.to_vec();
                x[j] += d;
                singularity_cost(model, &x, p).unwrap()
            };
            (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(4);
    let mut worst_jac: f64 = 0.0;
    let mut worst_cost: f64 = 0.0;
    let mut points = 0;
    for model in shipped_models() {
        for _ in 0..100 {
            let q = common::random_q(&model, &mut rng);
            points += 1;
            let j = geometric_jacobian(&model, &q).unwrap().matrix;
            for (c, col) in common::fd_jacobian(&model, &q, 1e-6).iter().enumerate() {
                let scale = j.column(c).norm().max(1.0);
                for r in 0..6 {
                    worst_jac = worst_jac.max((j[(r, c)] - col[r]).abs() / scale);
                }
            }
            for mode in [ObjectiveMode::ManipulabilityMax, ObjectiveMode::PotentialFunctions] {
                let p = SingularityObjectiveParams::with_mode(mode);
                let g = cost_gradient(&model, &q, &p).unwrap();
                let fd = fd_gradient(&model, &q, &p, 1e-6);
                let scale = g.iter().fold(0.0f64, |s, v| s.max(v.abs()));
                for (a, b) in g.iter().zip(&fd) {
                    let excess = ((a - b).abs() - 1e-8).max(0.0);
                    if scale > 0.0 {
                        worst_cost = worst_cost.max(excess / scale);
                    } else {
                        worst_cost = worst_cost.max(excess);
                    }
                }
            }
        }
    }
    let (fast, t) = within(start.elapsed(), 30.0);
    outcome(
        worst_jac <= 1e-5 && worst_cost <= 1e-5 && fast,
        format!("{points} points, Jacobian rel err {worst_jac:.2e}, cost gradient rel err {worst_cost:.2e}; {t}"),
    )
}

const SINGLE_JOINT: &str = r#"{
  "name": "single_revolute",
  "dof": 1,
  "rows": [{"theta_offset": 0.0, "d": 0.0, "a": 0.5, "alpha": 0.0, "joint": 1}],
  "q_min": [-3.0],
  "q_max": [3.0],
  "dq_max": [10.0]
}"#;

fn solution_ok(prob: &TrajectoryProblem, sol: &TrajectorySolution) -> bool {
    let m = prob.dof();
    let tol = 1e-9;
    let in_box = sol.states.iter().zip(&sol.inputs).all(|(x, v)| {
        (0..2 * m).all(|j| x[j] >= prob.x_lower[j] - tol && x[j] <= prob.x_upper[j] + tol)
            && (0..m).all(|j| v[j] >= prob.v_lower[j] - tol && v[j] <= prob.v_upper[j] + tol)
    });
    in_box && sol.t_f >= prob.t_min - tol && sol.dynamics_residual() <= 1e-6
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let opts = SolverOptions::default();
    let mut converged = Vec::new();

    let mut trivial_ok = true;
    let mut rng = common::rng(5);
    for model in shipped_models() {
        let q = common::random_q(&model, &mut rng);
        let prob = rest_to_rest(&model, &q, &q, 30, SingularityObjectiveParams::with_mode(ObjectiveMode::None)).unwrap();
        let sol = solve(&prob, &opts).unwrap();
        let vmax = sol.inputs.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        trivial_ok &= sol.status == SolveStatus::Converged && (sol.t_f - prob.t_min).abs() <= 1e-9 && vmax <= 1e-6;
        converged.push((prob, sol));
    }

    let slider = RobotModel::from_json(SINGLE_JOINT).unwrap();
    let (accel, dq) = (2.0, 1.0);
    let prob = rest_to_rest(&slider, &[0.0], &[dq], 30, SingularityObjectiveParams::with_mode(ObjectiveMode::None))
        .unwrap()
        .with_accel_bounds(accel)
        .with_input_weight(1e-3);
    let sol = solve(&prob, &opts).unwrap();
    let bound = 2.0 * (dq / accel).sqrt();
    let gap = (sol.t_f - bound).abs() / bound;
    let one_dof_ok = sol.status == SolveStatus::Converged && gap <= 0.15;
    let t_one = sol.t_f;
    converged.push((prob, sol));

    for model in shipped_models() {
        for mode in ObjectiveMode::ALL {
            let a = common::random_q(&model, &mut rng);
            let b = common::random_q(&model, &mut rng);
            let prob = rest_to_rest(&model, &a, &b, 30, SingularityObjectiveParams::with_mode(mode)).unwrap();
            let sol = solve(&prob, &opts).unwrap();
            converged.push((prob, sol));
        }
    }
    let checked: Vec<_> = converged.iter().filter(|(_, s)| s.status == SolveStatus::Converged).collect();
    let exact_ok = checked.iter().all(|(p, s)| solution_ok(p, s));
    let (fast, t) = within(start.elapsed(), 30.0);
    outcome(
        trivial_ok && one_dof_ok && exact_ok && fast,
        format!(
            "(a) trivial {}, (b) 1-DoF t_F {t_one:.4} vs {bound:.4} ({:.1}%) {}, (c) {} of {} converged solutions exact {}; {t}",
            if trivial_ok { "ok" } else { "FAIL" },
            100.0 * gap,
            if one_dof_ok { "ok" } else { "FAIL" },
            checked.len(),
            converged.len(),
            if exact_ok { "ok" } else { "FAIL" },
        ),
    )
}

fn benchmark(robot: &str, n_mc: usize, seed: u64) -> BenchmarkRun {
    let cfg = BenchmarkConfig::from_json(&format!(r#"{{"robot":"{robot}","n_mc":{n_mc},"seed":{seed},"N":30}}"#))
        .unwrap();
    run_benchmark(&cfg, None).unwrap()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for robot in ["comau", "iiwa", "panda"] {
        let run = benchmark(robot, 100, 2024);
        let s = &run.summary;
        let none = s.mode(ObjectiveMode::None).unwrap();
        let manip = s.mode(ObjectiveMode::ManipulabilityMax).unwrap();
        let prop = s.mode(ObjectiveMode::PotentialFunctions).unwrap();
        for m in [none, manip, prop] {
            println!(
                "    {robot} {:<20} conv {:>3}/{}  t_F {:8.3} ± {:7.3}  wall {:.3}s  m_min {:.3e}  m_max {:.3e}  m_avg {:.4}  l_p {:.3}  l_quat {:.4}",
                m.mode.name(),
                m.converged,
                m.samples,
                m.t_f.mean,
                m.t_f.std,
                m.wall_time.mean,
                m.m_min,
                m.m_max,
                m.m_avg.mean,
                m.l_p.mean,
                m.l_quat.mean
            );
        }
        let a = prop.m_min >= 1e-4 && 1e-4 > manip.m_min && manip.m_min > none.m_min;
        let b = manip.m_avg.mean > prop.m_avg.mean;
        let c = prop.wall_time.mean < manip.wall_time.mean;
        let d = if robot == "comau" {
            true
        } else {
            manip.l_p.mean > none.l_p.mean.max(prop.l_p.mean) && manip.l_quat.mean > none.l_quat.mean.max(prop.l_quat.mean)
        };
        let tag = |ok: bool| if ok { "ok" } else { "FAIL" };
        parts.push(format!("{robot}: a {} b {} c {} d {}", tag(a), tag(b), tag(c), tag(d)));
        pass &= a && b && c && d;
    }
    let (fast, t) = within(start.elapsed(), 15.0 * 60.0);
    outcome(pass && fast, format!("{}; {t}", parts.join(" | ")))
}

fn criterion_7() -> Outcome {
    let p = SingularityObjectiveParams::default();
    let at_zero = potential(0.0, &p);
    let at_ratio = potential(p.eta1 / p.eta2, &p);
    let e0 = (at_zero - 2400.0).abs() / 2400.0;
    let e1 = (at_ratio - 1.0).abs();
    outcome(e0 <= 1e-12 && e1 <= 1e-12, format!("phi(0) = {at_zero}, phi(eta1/eta2) = {at_ratio}"))
}

fn without_wall_time(csv: &str) -> String {
    let col = csv.lines().next().unwrap().split(',').position(|h| h == "wall_time").unwrap();
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_8() -> Outcome {
    let a = records_to_csv(&benchmark("iiwa", 10, 8).records);
    let b = records_to_csv(&benchmark("iiwa", 10, 8).records);
    let same = without_wall_time(&a) == without_wall_time(&b);
    outcome(same, format!("{} records compared", a.lines().count() - 1))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 symbolic vs numeric manipulability", criterion_1),
        ("2 singular-condition soundness", criterion_2),
        ("3 Cauchy-Binet property", criterion_3),
        ("4 Jacobian and cost-gradient correctness", criterion_4),
        ("5 solver sanity", criterion_5),
        ("6 Monte Carlo orderings", criterion_6),
        ("7 potential-function unit checks", criterion_7),
        ("8 benchmark determinism", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        let number = name.split(' ').next().unwrap();
        if !filter.is_empty() && !filter.iter().any(|f| f == number) {
            continue;
        }
        let o = run();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
