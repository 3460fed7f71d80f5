//! Free-final-time direct transcription over double-integrator joint
//! dynamics, solved with an augmented Lagrangian on the dynamics defects and
//! a projected L-BFGS inner loop for the box constraints.
//!
//! Decision vector layout: `ξ = [t_F, x_0 … x_{N−1}, v_0 … v_{N−1}]` with
//! `x_k = [q_k, dq_k]`. The endpoint equalities are imposed by collapsing the
//! bounds of `x_0` and `x_{N−1}` onto `x_S` and `x_T`, so they hold exactly
//! at every iterate.

mod export;
mod lbfgs;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cost::{cost_and_gradient_into, cost_value, ObjectiveMode, SingularityObjectiveParams};
use crate::error::OptimizerError;
use crate::kinematics::check_joints;
use crate::model::RobotModel;

pub use export::{solution_to_csv, solution_to_json, write_solution_csv, write_solution_json};

/// Default symmetric joint acceleration bound (rad/s²).
pub const DEFAULT_ACCEL_BOUND: f64 = 10.0;
/// Default lower bound on the final time (s).
pub const DEFAULT_T_MIN: f64 = 0.1;
/// Upper bound on the final time (s); only there to keep the box finite.
pub const T_MAX: f64 = 1e3;

/// `Φ = [[1, h], [0, 1]] ⊗ I_M`, `Γ = [[h²/2], [h]] ⊗ I_M`.
pub fn discretize(h: f64, dof: usize) -> Result<(DMatrix<f64>, DMatrix<f64>), OptimizerError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(OptimizerError::NonPositiveStep(h));
    }
    let mut phi = DMatrix::identity(2 * dof, 2 * dof);
    let mut gamma = DMatrix::zeros(2 * dof, dof);
    for j in 0..dof {
        phi[(j, dof + j)] = h;
        gamma[(j, j)] = 0.5 * h * h;
        gamma[(dof + j, j)] = h;
    }
    Ok((phi, gamma))
}

/// One instance of the trajectory NLP.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryProblem {
    pub model: RobotModel,
    /// Start state `[q; dq]`.
    pub x_s: Vec<f64>,
    /// Target state `[q; dq]`.
    pub x_t: Vec<f64>,
    /// Number of grid points.
    pub n: usize,
    pub objective: SingularityObjectiveParams,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub v_lower: Vec<f64>,
    pub v_upper: Vec<f64>,
    pub t_min: f64,
    /// Weight on `Σ v_kᵀ v_k`.
    pub input_weight: f64,
}

/// Builds a problem with joint-limit state bounds from the model, velocity
/// bounds `±dq_max`, acceleration bounds `±DEFAULT_ACCEL_BOUND` and
/// `t_min = DEFAULT_T_MIN`.
pub fn build_problem(
    model: &RobotModel,
    x_s: &[f64],
    x_t: &[f64],
    n: usize,
    objective: SingularityObjectiveParams,
) -> Result<TrajectoryProblem, OptimizerError> {
    let m = model.dof;
    let neg: Vec<f64> = model.dq_max.iter().map(|v| -v).collect();
    let prob = TrajectoryProblem {
        model: model.clone(),
        x_s: x_s.to_vec(),
        x_t: x_t.to_vec(),
        n,
        objective,
        x_lower: [model.q_min.as_slice(), neg.as_slice()].concat(),
        x_upper: [model.q_max.as_slice(), model.dq_max.as_slice()].concat(),
        v_lower: vec![-DEFAULT_ACCEL_BOUND; m],
        v_upper: vec![DEFAULT_ACCEL_BOUND; m],
        t_min: DEFAULT_T_MIN,
        input_weight: 1.0,
    };
    prob.validate()?;
    Ok(prob)
}

/// Rest-to-rest problem between two joint configurations.
pub fn rest_to_rest(
    model: &RobotModel,
    q_s: &[f64],
    q_t: &[f64],
    n: usize,
    objective: SingularityObjectiveParams,
) -> Result<TrajectoryProblem, OptimizerError> {
    let zeros = vec![0.0; model.dof];
    build_problem(
        model,
        &[q_s, zeros.as_slice()].concat(),
        &[q_t, zeros.as_slice()].concat(),
        n,
        objective,
    )
}

impl TrajectoryProblem {
    pub fn dof(&self) -> usize {
        self.model.dof
    }

    /// Number of decision variables, `1 + N·2M + N·M`.
    pub fn num_variables(&self) -> usize {
        1 + self.n * 3 * self.dof()
    }

    pub fn with_accel_bounds(mut self, bound: f64) -> Self {
        self.v_lower = vec![-bound; self.dof()];
        self.v_upper = vec![bound; self.dof()];
        self
    }

    pub fn with_t_min(mut self, t_min: f64) -> Self {
        self.t_min = t_min;
        self
    }

    pub fn with_input_weight(mut self, weight: f64) -> Self {
        self.input_weight = weight;
        self
    }

    /// Structural checks. Endpoints outside the bounds are not an error
    /// here; `solve` reports them as `Infeasible`.
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let m = self.dof();
        let bad = |msg: String| Err(OptimizerError::InvalidProblem(msg));
        for (name, v, len) in [
            ("x_s", &self.x_s, 2 * m),
            ("x_t", &self.x_t, 2 * m),
            ("x_lower", &self.x_lower, 2 * m),
            ("x_upper", &self.x_upper, 2 * m),
            ("v_lower", &self.v_lower, m),
            ("v_upper", &self.v_upper, m),
        ] {
            if v.len() != len {
                return bad(format!("{name} has length {}, expected {len}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} contains a non-finite value"));
            }
        }
        if self.n < 3 {
            return bad(format!("N must be at least 3, got {}", self.n));
        }
        if !(self.t_min > 0.0 && self.t_min < T_MAX) {
            return bad(format!("t_min must lie in (0, {T_MAX}), got {}", self.t_min));
        }
        if !(self.input_weight >= 0.0 && self.input_weight.is_finite()) {
            return bad(format!("input_weight must be non-negative, got {}", self.input_weight));
        }
        for j in 0..m {
            if !(self.v_lower[j] < 0.0 && 0.0 < self.v_upper[j]) {
                return bad(format!("input bounds of joint {} must straddle zero", j + 1));
            }
        }
        for i in 0..2 * m {
            if !(self.x_lower[i] < self.x_upper[i]) {
                return bad(format!("state bound {} is empty", i + 1));
            }
        }
        if let Err(e) = self.objective.validate() {
            return bad(e);
        }
        Ok(())
    }

    /// Indices of endpoint components outside the state box.
    fn endpoint_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, x) in [("x_s", &self.x_s), ("x_t", &self.x_t)] {
            for i in 0..x.len() {
                if x[i] < self.x_lower[i] || x[i] > self.x_upper[i] {
                    out.push(format!("{name}[{i}] = {} outside [{}, {}]", x[i], self.x_lower[i], self.x_upper[i]));
                }
            }
        }
        out
    }

    fn x_index(&self, k: usize) -> usize {
        1 + k * 2 * self.dof()
    }

    fn v_index(&self, k: usize) -> usize {
        1 + self.n * 2 * self.dof() + k * self.dof()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let nv = self.num_variables();
        let mut lo = vec![0.0; nv];
        let mut hi = vec![0.0; nv];
        lo[0] = self.t_min;
        hi[0] = T_MAX;
        let m2 = 2 * self.dof();
        for k in 0..self.n {
            let i = self.x_index(k);
            let (l, h): (&[f64], &[f64]) = if k == 0 {
                (&self.x_s, &self.x_s)
            } else if k == self.n - 1 {
                (&self.x_t, &self.x_t)
            } else {
                (&self.x_lower, &self.x_upper)
            };
            lo[i..i + m2].copy_from_slice(l);
            hi[i..i + m2].copy_from_slice(h);
            let iv = self.v_index(k);
            lo[iv..iv + self.dof()].copy_from_slice(&self.v_lower);
            hi[iv..iv + self.dof()].copy_from_slice(&self.v_upper);
        }
        (lo, hi)
    }

    fn num_constraints(&self) -> usize {
        (self.n - 1) * 2 * self.dof()
    }
}

fn linear_guess(prob: &TrajectoryProblem) -> Vec<f64> {
    let m = prob.dof();
    let n = prob.n;
    let mut t_f = prob.t_min.max(1.0);
    for j in 0..m {
        let dq_max = prob.x_upper[m + j].min(-prob.x_lower[m + j]);
        let span = (prob.x_t[j] - prob.x_s[j]).abs() / (0.5 * dq_max);
        t_f = t_f.max(span);
    }
    let t_f = t_f.min(T_MAX);
    let h = t_f / n as f64;
    let mut xi = vec![0.0; prob.num_variables()];
    xi[0] = t_f;
    for k in 0..n {
        let i = prob.x_index(k);
        let s = k as f64 / (n - 1) as f64;
        for j in 0..m {
            xi[i + j] = prob.x_s[j] + s * (prob.x_t[j] - prob.x_s[j]);
        }
    }
    for k in 0..n {
        let i = prob.x_index(k);
        for j in 0..m {
            xi[i + m + j] = if k == 0 {
                prob.x_s[m + j]
            } else if k == n - 1 {
                prob.x_t[m + j]
            } else {
                (xi[prob.x_index(k + 1) + j] - xi[i + j]) / h
            };
        }
    }
    xi
}

/// Linear interpolation of `q` on the grid, forward-difference velocities,
/// zero inputs and `t_F⁰ = max(t_min, 1, max_j |Δq_j| / (0.5 dq_max_j))`.
pub fn initial_guess(prob: &TrajectoryProblem) -> Result<Vec<f64>, OptimizerError> {
    prob.validate()?;
    let violations = prob.endpoint_violations();
    if !violations.is_empty() {
        return Err(OptimizerError::InvalidProblem(format!(
            "endpoint outside bounds: {}",
            violations.join("; ")
        )));
    }
    Ok(linear_guess(prob))
}

/// Dynamics defects `c_k = x_{k+1} − Φ x_k − Γ v_k`, `k = 0..N−2`, stacked
/// as `[c^q_k, c^dq_k]`.
pub fn dynamics_defects(prob: &TrajectoryProblem, xi: &[f64]) -> Vec<f64> {
    let m = prob.dof();
    let h = xi[0] / prob.n as f64;
    let mut c = vec![0.0; prob.num_constraints()];
    for k in 0..prob.n - 1 {
        let (i0, i1, iv) = (prob.x_index(k), prob.x_index(k + 1), prob.v_index(k));
        for j in 0..m {
            let (q0, dq0, q1, dq1, v) = (xi[i0 + j], xi[i0 + m + j], xi[i1 + j], xi[i1 + m + j], xi[iv + j]);
            c[k * 2 * m + j] = q1 - q0 - h * dq0 - 0.5 * h * h * v;
            c[k * 2 * m + m + j] = dq1 - dq0 - h * v;
        }
    }
    c
}

/// `t_F + Σ_k [w_v v_kᵀ v_k + L_sing(q_k)]`, with its gradient added into
/// `grad` when given.
pub fn nlp_objective(prob: &TrajectoryProblem, xi: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
    let m = prob.dof();
    let mut f = xi[0];
    if let Some(g) = grad.as_deref_mut() {
        g[0] += 1.0;
    }
    for k in 0..prob.n {
        let iv = prob.v_index(k);
        for j in 0..m {
            let v = xi[iv + j];
            f += prob.input_weight * v * v;
            if let Some(g) = grad.as_deref_mut() {
                g[iv + j] += 2.0 * prob.input_weight * v;
            }
        }
    }
    if prob.objective.mode != ObjectiveMode::None {
        for k in 0..prob.n {
            let i = prob.x_index(k);
            let q = &xi[i..i + m];
            match grad.as_deref_mut() {
                // the endpoint configurations are fixed, so their gradient is never needed
                Some(g) if k != 0 && k != prob.n - 1 => {
                    f += cost_and_gradient_into(&prob.model, q, &prob.objective, &mut g[i..i + m]);
                }
                _ => f += cost_value(&prob.model, q, &prob.objective),
            }
        }
    }
    f
}

/// Augmented Lagrangian `f + λᵀc + (μ/2)‖c‖²`; its gradient is written to
/// `grad` (overwritten) when given.
pub fn augmented_lagrangian(
    prob: &TrajectoryProblem,
    xi: &[f64],
    lambda: &[f64],
    mu: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let c = dynamics_defects(prob, xi);
    let mut total = 0.0;
    let y: Vec<f64> = c
        .iter()
        .zip(lambda)
        .map(|(&ci, &li)| {
            total += li * ci + 0.5 * mu * ci * ci;
            li + mu * ci
        })
        .collect();
    match grad {
        None => nlp_objective(prob, xi, None) + total,
        Some(g) => {
            g.iter_mut().for_each(|v| *v = 0.0);
            let f = nlp_objective(prob, xi, Some(g));
            add_defect_jacobian_t(prob, xi, &y, g);
            f + total
        }
    }
}

/// `g += (∂c/∂ξ)ᵀ y`.
fn add_defect_jacobian_t(prob: &TrajectoryProblem, xi: &[f64], y: &[f64], g: &mut [f64]) {
    let m = prob.dof();
    let nf = prob.n as f64;
    let h = xi[0] / nf;
    let mut dt = 0.0;
    for k in 0..prob.n - 1 {
        let (i0, i1, iv) = (prob.x_index(k), prob.x_index(k + 1), prob.v_index(k));
        for j in 0..m {
            let yq = y[k * 2 * m + j];
            let ydq = y[k * 2 * m + m + j];
            let (dq0, v) = (xi[i0 + m + j], xi[iv + j]);
            g[i1 + j] += yq;
            g[i0 + j] -= yq;
            g[i1 + m + j] += ydq;
            g[i0 + m + j] -= ydq + h * yq;
            g[iv + j] -= 0.5 * h * h * yq + h * ydq;
            dt += yq * (dq0 + h * v) + ydq * v;
        }
    }
    g[0] -= dt / nf;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Tolerance on the defect ∞-norm and on the rollout deviation.
    pub tol_feas: f64,
    /// Projected Lagrangian gradient ∞-norm tolerance, scaled by
    /// `max(1, |objective|)`.
    pub tol_stat: f64,
    pub lbfgs_memory: usize,
    pub initial_penalty: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_outer: 40,
            max_inner: 4000,
            tol_feas: 1e-6,
            tol_stat: 1e-4,
            lbfgs_memory: 10,
            initial_penalty: 100.0,
        }
    }
}

const PENALTY_GROWTH: f64 = 10.0;
const PENALTY_MAX: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Total inner (quasi-Newton) iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    /// Larger of the defect ∞-norm and the rollout deviation.
    pub constraint_violation: f64,
    /// Scaled projected-gradient norm of the Lagrangian.
    pub stationarity: f64,
    pub wall_time: f64,
    pub objective_value: f64,
    pub final_penalty: f64,
    /// Final time of the initial guess.
    pub initial_t_f: f64,
    pub message: String,
    /// Accepted augmented-Lagrangian values, one list per outer iteration.
    #[serde(skip)]
    pub merit_trace: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySolution {
    pub t_f: f64,
    /// N rows of `[q; dq]`.
    pub states: Vec<Vec<f64>>,
    /// N rows of `v`.
    pub inputs: Vec<Vec<f64>>,
    pub status: SolveStatus,
    pub diagnostics: Diagnostics,
}

impl TrajectorySolution {
    /// Sampling times `k·t_F/N`.
    pub fn grid_times(&self) -> Vec<f64> {
        let n = self.states.len();
        (0..n).map(|k| k as f64 * self.t_f / n as f64).collect()
    }

    /// Joint positions of grid point `k`.
    pub fn q(&self, k: usize) -> &[f64] {
        let m = self.inputs[k].len();
        &self.states[k][..m]
    }

    /// ∞-norm of `x_{k+1} − Φ x_k − Γ v_k` over the returned trajectory.
    pub fn dynamics_residual(&self) -> f64 {
        let n = self.states.len();
        let h = self.t_f / n as f64;
        let m = self.inputs.first().map_or(0, |v| v.len());
        let mut worst: f64 = 0.0;
        for k in 0..n.saturating_sub(1) {
            let (x0, x1, v) = (&self.states[k], &self.states[k + 1], &self.inputs[k]);
            for j in 0..m {
                worst = worst
                    .max((x1[j] - x0[j] - h * x0[m + j] - 0.5 * h * h * v[j]).abs())
                    .max((x1[m + j] - x0[m + j] - h * v[j]).abs());
            }
        }
        worst
    }
}

fn unpack(prob: &TrajectoryProblem, xi: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = prob.dof();
    let states = (0..prob.n)
        .map(|k| xi[prob.x_index(k)..prob.x_index(k) + 2 * m].to_vec())
        .collect();
    let inputs = (0..prob.n)
        .map(|k| xi[prob.v_index(k)..prob.v_index(k) + m].to_vec())
        .collect();
    (states, inputs)
}

/// Largest deviation between the grid states and the open-loop simulation
/// of the dynamics from `x_0` with the grid inputs. Small defects compound
/// along the horizon, so this can exceed the defect norm by a factor ~N.
pub fn rollout_deviation(prob: &TrajectoryProblem, xi: &[f64]) -> f64 {
    let m = prob.dof();
    let h = xi[0] / prob.n as f64;
    let i0 = prob.x_index(0);
    let mut x = xi[i0..i0 + 2 * m].to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..prob.n - 1 {
        let iv = prob.v_index(k);
        let i1 = prob.x_index(k + 1);
        for j in 0..m {
            let v = xi[iv + j];
            x[j] += h * x[m + j] + 0.5 * h * h * v;
            x[m + j] += h * v;
        }
        for j in 0..2 * m {
            worst = worst.max((x[j] - xi[i1 + j]).abs());
        }
    }
    worst
}

/// Solves the trajectory NLP from the linear initial guess.
pub fn solve(prob: &TrajectoryProblem, opts: &SolverOptions) -> Result<TrajectorySolution, OptimizerError> {
    prob.validate()?;
    check_joints(&prob.model, &prob.x_s[..prob.dof()])?;
    check_joints(&prob.model, &prob.x_t[..prob.dof()])?;
    if opts.max_outer == 0 || opts.max_inner == 0 || opts.lbfgs_memory == 0 {
        return Err(OptimizerError::InvalidProblem(
            "solver iteration limits and memory must be positive".into(),
        ));
    }
    if !(opts.tol_feas > 0.0 && opts.tol_stat > 0.0 && opts.initial_penalty > 0.0) {
        return Err(OptimizerError::InvalidProblem(
            "solver tolerances and initial penalty must be positive".into(),
        ));
    }
    let start = Instant::now();
    let mut xi = linear_guess(prob);
    let initial_t_f = xi[0];

    let violations = prob.endpoint_violations();
    if !violations.is_empty() {
        let (states, inputs) = unpack(prob, &xi);
        return Ok(TrajectorySolution {
            t_f: xi[0],
            states,
            inputs,
            status: SolveStatus::Infeasible,
            diagnostics: Diagnostics {
                iterations: 0,
                outer_iterations: 0,
                constraint_violation: f64::NAN,
                stationarity: f64::NAN,
                wall_time: start.elapsed().as_secs_f64(),
                objective_value: f64::NAN,
                final_penalty: 0.0,
                initial_t_f,
                message: format!("endpoint outside bounds: {}", violations.join("; ")),
                merit_trace: Vec::new(),
            },
        });
    }

    let (lo, hi) = prob.bounds();
    let mut lambda = vec![0.0; prob.num_constraints()];
    let mut mu = opts.initial_penalty;
    let mut iterations = 0;
    let mut merit_trace = Vec::new();
    let mut prev_violation = f64::INFINITY;
    let mut status = SolveStatus::MaxIter;
    let mut violation = f64::INFINITY;
    let mut stationarity = f64::INFINITY;
    let mut outer = 0;
    let mut stalled_at_cap = 0;
    let mut last_inner = "not run";

    while outer < opts.max_outer {
        outer += 1;
        let scale = nlp_objective(prob, &xi, None).abs().max(1.0);
        let inner_tol = scale * 0.1f64.powi(outer as i32 + 1).max(0.1 * opts.tol_stat);
        let mut trace = Vec::new();
        let lam = lambda.clone();
        let mut f = |x: &[f64], g: Option<&mut [f64]>| augmented_lagrangian(prob, x, &lam, mu, g);
        let inner = lbfgs::minimize(
            &mut f,
            &mut xi,
            &lo,
            &hi,
            &lbfgs::Settings {
                memory: opts.lbfgs_memory,
                max_iter: opts.max_inner,
                tol: inner_tol,
            },
            &mut trace,
        );
        iterations += inner.iterations;
        last_inner = match inner.stop {
            lbfgs::InnerStop::Converged => "converged",
            lbfgs::InnerStop::MaxIter => "hit its iteration limit",
            lbfgs::InnerStop::Stalled => "stalled",
        };
        merit_trace.push(trace);

        let c = dynamics_defects(prob, &xi);
        violation = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(rollout_deviation(prob, &xi));
        // the inner gradient at the new point is the Lagrangian gradient for
        // the updated multipliers λ + μc
        let objective = nlp_objective(prob, &xi, None);
        stationarity = inner.projected_gradient / objective.abs().max(1.0);
        for (l, ci) in lambda.iter_mut().zip(&c) {
            *l += mu * ci;
        }
        if violation <= opts.tol_feas && stationarity <= opts.tol_stat {
            status = SolveStatus::Converged;
            break;
        }
        if violation > 0.25 * prev_violation && violation > opts.tol_feas {
            if mu >= PENALTY_MAX {
                stalled_at_cap += 1;
            }
            mu = (mu * PENALTY_GROWTH).min(PENALTY_MAX);
        }
        prev_violation = violation;
        if stalled_at_cap >= 3 && violation > 1e3 * opts.tol_feas {
            status = SolveStatus::Infeasible;
            break;
        }
    }

    let objective_value = nlp_objective(prob, &xi, None);
    let (states, inputs) = unpack(prob, &xi);
    let message = match status {
        SolveStatus::Converged => "converged".to_string(),
        SolveStatus::MaxIter => format!(
            "outer iteration limit reached (violation {violation:.2e}, stationarity {stationarity:.2e}, last inner solve {last_inner})"
        ),
        SolveStatus::Infeasible => format!(
            "dynamics defects stuck at {violation:.2e} with the penalty at its cap"
        ),
    };
    Ok(TrajectorySolution {
        t_f: xi[0],
        states,
        inputs,
        status,
        diagnostics: Diagnostics {
            iterations,
            outer_iterations: outer,
            constraint_violation: violation,
            stationarity,
            wall_time: start.elapsed().as_secs_f64(),
            objective_value,
            final_penalty: mu,
            initial_t_f,
            message,
            merit_trace,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{shipped_model, RobotFamily};

    #[test]
    fn discretize_reference() {
        let (phi, gamma) = discretize(0.1, 1).unwrap();
        assert_eq!(phi, DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]));
        assert!((gamma[(0, 0)] - 0.005).abs() < 1e-18);
        assert_eq!(gamma[(1, 0)], 0.1);
        let (phi, gamma) = discretize(0.2, 7).unwrap();
        assert_eq!(phi.shape(), (14, 14));
        assert_eq!(gamma.shape(), (14, 7));
        assert_eq!(phi[(2, 9)], 0.2);
        assert_eq!(phi[(2, 8)], 0.0);
        assert!(matches!(discretize(0.0, 3), Err(OptimizerError::NonPositiveStep(_))));
        assert!(matches!(discretize(-1.0, 3), Err(OptimizerError::NonPositiveStep(_))));
    }

    #[test]
    fn discretization_is_exact_for_constant_input() {
        let (h, v) = (0.37, 1.3);
        let (phi, gamma) = discretize(h, 1).unwrap();
        let mut x = nalgebra::DVector::from_vec(vec![0.2, -0.5]);
        for k in 1..=10 {
            x = &phi * &x + &gamma * nalgebra::DVector::from_vec(vec![v]);
            let t = k as f64 * h;
            assert!((x[0] - (0.2 - 0.5 * t + 0.5 * v * t * t)).abs() < 1e-13);
            assert!((x[1] - (-0.5 + v * t)).abs() < 1e-13);
        }
    }

    #[test]
    fn variable_count() {
        let iiwa = shipped_model(RobotFamily::Iiwa);
        let p = rest_to_rest(&iiwa, &[0.1; 7], &[0.2; 7], 30, Default::default()).unwrap();
        assert_eq!(p.num_variables(), 631);
    }

    #[test]
    fn guess_at_rest() {
        let iiwa = shipped_model(RobotFamily::Iiwa);
        let q = [0.1, 0.5, 0.0, -1.0, 0.3, 0.7, 0.0];
        let p = rest_to_rest(&iiwa, &q, &q, 10, Default::default()).unwrap();
        let xi = initial_guess(&p).unwrap();
        assert_eq!(xi[0], 1.0);
        let (states, inputs) = unpack(&p, &xi);
        assert!(states.iter().all(|s| s[..7] == q && s[7..].iter().all(|&v| v == 0.0)));
        assert!(inputs.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn guess_meets_endpoints_and_bounds() {
        let panda = shipped_model(RobotFamily::Panda);
        let qs = [0.5, -1.0, 0.3, -2.0, 0.1, 1.5, -0.3];
        let qt = [-0.5, 1.0, -0.3, -0.5, 1.1, 3.0, 0.3];
        let p = rest_to_rest(&panda, &qs, &qt, 30, Default::default()).unwrap();
        let xi = initial_guess(&p).unwrap();
        let (states, _) = unpack(&p, &xi);
        assert_eq!(states[0], p.x_s);
        assert_eq!(states[29], p.x_t);
        let (lo, hi) = p.bounds();
        assert!(xi.iter().zip(lo.iter().zip(&hi)).all(|(x, (l, h))| l <= x && x <= h));
        let expected_tf = (0..7)
            .map(|j| (qt[j] - qs[j]).abs() / (0.5 * panda.dq_max[j]))
            .fold(1.0f64, f64::max);
        assert_eq!(xi[0], expected_tf);
    }

    #[test]
    fn guess_rejects_out_of_bounds_endpoint() {
        let comau = shipped_model(RobotFamily::Comau);
        let mut q = [0.0; 6];
        q[4] = 3.0;
        let p = rest_to_rest(&comau, &[0.1; 6], &q, 10, Default::default()).unwrap();
        assert!(matches!(initial_guess(&p), Err(OptimizerError::InvalidProblem(_))));
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn validation_errors() {
        let comau = shipped_model(RobotFamily::Comau);
        assert!(rest_to_rest(&comau, &[0.0; 6], &[0.0; 6], 2, Default::default()).is_err());
        assert!(rest_to_rest(&comau, &[0.0; 5], &[0.0; 6], 10, Default::default()).is_err());
        let p = rest_to_rest(&comau, &[0.0; 6], &[0.0; 6], 10, Default::default()).unwrap();
        assert!(p.clone().with_t_min(0.0).validate().is_err());
        assert!(p.with_accel_bounds(-1.0).validate().is_err());
    }
}
