use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use singplan::bench::{run_benchmark, write_outputs, BenchmarkConfig};
use singplan::optimizer::{write_solution_csv, write_solution_json, DEFAULT_ACCEL_BOUND, DEFAULT_T_MIN};
use singplan::singularity::{verify_symbolic, SymbolicCheck};
use singplan::{
    analyze, forward_kinematics, geometric_jacobian, jacobian_ee_frame, manipulability, resolve_robot, solve,
    build_problem, ObjectiveMode, RobotModel, SingularityError, SingularityObjectiveParams, SolveStatus,
    SolverOptions,
};

const EXIT_USAGE: u8 = 2;
const EXIT_SYMBOLIC_MISMATCH: u8 = 3;
const EXIT_MAX_ITER: u8 = 4;
const EXIT_INFEASIBLE: u8 = 5;
const SYMBOLIC_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "singplan", version, about = "Singularity-aware time-optimal trajectory planning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Shipped robot (comau, iiwa, panda) or path to a model JSON file.
    #[arg(long, global = true)]
    robot: Option<String>,
    /// Emit compact JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for `benchmark`.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory for written files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Read angle arguments in degrees.
    #[arg(long, global = true)]
    deg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    World,
    Ee,
}

#[derive(Subcommand)]
enum Command {
    /// End-effector pose.
    Fk {
        /// Comma-separated joint angles.
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
    /// Geometric Jacobian (6×M).
    Jacobian {
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long, value_enum, default_value = "world")]
        frame: FrameArg,
    },
    /// Singularity report of a configuration.
    Singularity {
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
    /// Compare the closed-form index with the numeric one on random samples.
    VerifySymbolic {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Plan one trajectory.
    Plan {
        /// Start state: M joint angles (at rest) or 2M values `q, dq`.
        #[arg(long = "from", allow_hyphen_values = true)]
        x_s: String,
        /// Target state, same layout as `--from`.
        #[arg(long = "to", allow_hyphen_values = true)]
        x_t: String,
        /// none, manipulability_max or potential_functions.
        #[arg(long, default_value = "potential_functions")]
        mode: String,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_T_MIN)]
        t_min: f64,
        #[arg(long, default_value_t = DEFAULT_ACCEL_BOUND)]
        accel_bound: f64,
        #[arg(long, default_value_t = 1.0)]
        input_weight: f64,
    },
    /// Monte Carlo benchmark from a JSON config.
    Benchmark { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn emit(global: &Global, value: &Value) {
    if global.json {
        println!("{value}");
    } else {
        println!("{}", serde_json::to_string_pretty(value).expect("json value"));
    }
}

fn robot(global: &Global) -> Result<RobotModel, String> {
    let name = global.robot.as_deref().ok_or("--robot is required")?;
    resolve_robot(name).map_err(|e| e.to_string())
}

fn parse_list(text: &str, deg: bool) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            let v: f64 = s.trim().parse().map_err(|_| format!("not a number: `{}`", s.trim()))?;
            if !v.is_finite() {
                return Err(format!("not finite: `{}`", s.trim()));
            }
            Ok(if deg { v.to_radians() } else { v })
        })
        .collect()
}

fn parse_q(model: &RobotModel, text: &str, deg: bool) -> Result<Vec<f64>, String> {
    let q = parse_list(text, deg)?;
    if q.len() != model.dof {
        return Err(format!("{} expects {} joint values, got {}", model.name, model.dof, q.len()));
    }
    Ok(q)
}

fn parse_state(model: &RobotModel, text: &str, deg: bool) -> Result<Vec<f64>, String> {
    let mut x = parse_list(text, deg)?;
    let m = model.dof;
    if x.len() == m {
        x.resize(2 * m, 0.0);
    }
    if x.len() != 2 * m {
        return Err(format!("{} expects {} or {} state values, got {}", model.name, m, 2 * m, x.len()));
    }
    Ok(x)
}

fn units(global: &Global) -> &'static str {
    if global.deg {
        "deg"
    } else {
        "rad"
    }
}

fn run(cli: &Cli) -> Result<u8, String> {
    let g = &cli.global;
    match &cli.command {
        Command::Fk { q } => {
            let model = robot(g)?;
            let q = parse_q(&model, q, g.deg)?;
            let pose = forward_kinematics(&model, &q).map_err(|e| e.to_string())?.pose;
            let r = pose.rotation;
            let rows: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])).collect();
            emit(
                g,
                &json!({
                    "robot": model.name,
                    "angle_input": units(g),
                    "rotation": rows,
                    "position": [pose.translation.x, pose.translation.y, pose.translation.z],
                }),
            );
            Ok(0)
        }
        Command::Jacobian { q, frame } => {
            let model = robot(g)?;
            let q = parse_q(&model, q, g.deg)?;
            let jac = match frame {
                FrameArg::World => geometric_jacobian(&model, &q),
                FrameArg::Ee => jacobian_ee_frame(&model, &q),
            }
            .map_err(|e| e.to_string())?;
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|i| (0..model.dof).map(|j| jac.matrix[(i, j)]).collect())
                .collect();
            emit(
                g,
                &json!({ "robot": model.name, "angle_input": units(g), "frame": jac.frame, "jacobian": rows }),
            );
            Ok(0)
        }
        Command::Singularity { q } => {
            let model = robot(g)?;
            let q = parse_q(&model, q, g.deg)?;
            let report = analyze(&model, &q).map_err(|e| e.to_string())?;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["robot"] = json!(model.name);
            value["angle_input"] = json!(units(g));
            emit(g, &value);
            Ok(0)
        }
        Command::VerifySymbolic { samples } => {
            let model = robot(g)?;
            let seed = g.seed.unwrap_or(0);
            let check: SymbolicCheck = match verify_symbolic(&model, *samples, seed) {
                Ok(c) => c,
                Err(SingularityError::PandaUnsupported) => {
                    return Err(format!("{}: {}", model.name, SingularityError::PandaUnsupported));
                }
                Err(e) => return Err(e.to_string()),
            };
            let ok = check.max_relative_error <= SYMBOLIC_TOLERANCE;
            if g.json {
                println!(
                    "{}",
                    json!({
                        "robot": model.name,
                        "samples": check.samples,
                        "seed": seed,
                        "max_relative_error": check.max_relative_error,
                        "worst_sample": check.worst_sample,
                        "tolerance": SYMBOLIC_TOLERANCE,
                        "pass": ok,
                    })
                );
            } else {
                println!(
                    "{}: max relative error {:e} over {} samples (seed {seed}, tolerance {SYMBOLIC_TOLERANCE:e}) {}",
                    model.name,
                    check.max_relative_error,
                    check.samples,
                    if ok { "ok" } else { "EXCEEDED" }
                );
            }
            Ok(if ok { 0 } else { EXIT_SYMBOLIC_MISMATCH })
        }
        Command::Plan { x_s, x_t, mode, n, t_min, accel_bound, input_weight } => {
            let model = robot(g)?;
            let x_s = parse_state(&model, x_s, g.deg)?;
            let x_t = parse_state(&model, x_t, g.deg)?;
            let mode = ObjectiveMode::from_name(mode).ok_or_else(|| format!("unknown mode `{mode}`"))?;
            let problem = build_problem(&model, &x_s, &x_t, *n, SingularityObjectiveParams::with_mode(mode))
                .map_err(|e| e.to_string())?
                .with_t_min(*t_min)
                .with_accel_bounds(*accel_bound)
                .with_input_weight(*input_weight);
            problem.validate().map_err(|e| e.to_string())?;
            let sol = solve(&problem, &SolverOptions::default()).map_err(|e| e.to_string())?;
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            let (json_path, csv_path) = (out.join("solution.json"), out.join("solution.csv"));
            write_solution_json(&json_path, &sol).map_err(|e| format!("{}: {e}", json_path.display()))?;
            write_solution_csv(&csv_path, &model, &sol).map_err(|e| format!("{}: {e}", csv_path.display()))?;
            let min_m = (0..sol.states.len())
                .map(|k| manipulability(&model, sol.q(k)).unwrap_or(f64::NAN))
                .fold(f64::INFINITY, f64::min);
            if g.json {
                println!(
                    "{}",
                    json!({
                        "robot": model.name,
                        "mode": mode,
                        "angle_input": units(g),
                        "t_F": sol.t_f,
                        "status": sol.status,
                        "min_m": min_m,
                        "solution_json": json_path,
                        "solution_csv": csv_path,
                    })
                );
            } else {
                println!("t_F={} status={} min_m={:e}", sol.t_f, sol.status.name(), min_m);
            }
            Ok(match sol.status {
                SolveStatus::Converged => 0,
                SolveStatus::MaxIter => EXIT_MAX_ITER,
                SolveStatus::Infeasible => EXIT_INFEASIBLE,
            })
        }
        Command::Benchmark { config } => {
            let mut cfg = BenchmarkConfig::load(config).map_err(|e| format!("{}: {e}", config.display()))?;
            if let Some(robot) = &g.robot {
                cfg.robot = robot.clone();
            }
            if let Some(seed) = g.seed {
                cfg.seed = seed;
            }
            if g.jobs.is_some() {
                cfg.jobs = g.jobs;
            }
            if let Some(out) = &g.out {
                cfg.output = Some(out.clone());
            }
            let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
            let progress = |done: usize, total: usize| eprintln!("[{done}/{total}] samples finished");
            let run = run_benchmark(&cfg, Some(&progress)).map_err(|e| e.to_string())?;
            let (csv, summary) = write_outputs(&out, &run).map_err(|e| e.to_string())?;
            if g.json {
                println!("{}", serde_json::to_string(&run.summary).expect("summary serializes"));
            } else {
                for m in &run.summary.modes {
                    println!(
                        "{:<20} converged {}/{}  t_F {:.3}±{:.3}  m_min {:.3e}  m_avg {:.4}  wall {:.3}s",
                        m.mode.name(),
                        m.converged,
                        m.samples,
                        m.t_f.mean,
                        m.t_f.std,
                        m.m_min,
                        m.m_avg.mean,
                        m.wall_time.mean
                    );
                }
                println!("wrote {} and {}", csv.display(), summary.display());
            }
            Ok(0)
        }
    }
}
