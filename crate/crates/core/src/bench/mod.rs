//! Monte Carlo comparison of the objective modes on random rest-to-rest
//! instances.
//!
//! Every sample draws its endpoints from its own ChaCha stream keyed by
//! `(seed, sample id)`, so the sample set does not depend on scheduling and
//! all modes solve identical instances.

pub mod metrics;
mod output;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{ObjectiveMode, SingularityObjectiveParams};
use crate::error::BenchError;
use crate::model::{resolve_robot, RobotModel};
use crate::optimizer::{
    rest_to_rest, solve, SolveStatus, SolverOptions, TrajectorySolution, DEFAULT_ACCEL_BOUND, DEFAULT_T_MIN,
};
use crate::singularity::manipulability;

pub use metrics::{metric_m_avg, metric_m_min_max, metric_path_length, metric_quat_length};
pub use output::{records_to_csv, write_outputs, RECORDS_CSV_HEADER};

/// Endpoint samples with `m(q)` below this are redrawn by default.
pub const DEFAULT_M_EXCL: f64 = 1e-4;
/// Rejections tolerated per endpoint pair before giving up.
pub const REJECTION_BUDGET: usize = 10_000;

fn default_modes() -> Vec<ObjectiveMode> {
    ObjectiveMode::ALL.to_vec()
}

/// Benchmark configuration; every key is optional except `robot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Shipped robot name or model file path.
    pub robot: String,
    pub n_mc: usize,
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<ObjectiveMode>,
    #[serde(alias = "N")]
    pub n: usize,
    pub m_excl: f64,
    pub w_m: f64,
    pub epsilon: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub t_min: f64,
    pub accel_bound: f64,
    pub input_weight: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub tol_feas: f64,
    pub tol_stat: f64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Output directory for `records.csv` and `summary.json`.
    pub output: Option<PathBuf>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let obj = SingularityObjectiveParams::default();
        let solver = SolverOptions::default();
        BenchmarkConfig {
            robot: String::new(),
            n_mc: 100,
            seed: 0,
            modes: default_modes(),
            n: 30,
            m_excl: DEFAULT_M_EXCL,
            w_m: obj.w_m,
            epsilon: obj.epsilon,
            eta1: obj.eta1,
            eta2: obj.eta2,
            t_min: DEFAULT_T_MIN,
            accel_bound: DEFAULT_ACCEL_BOUND,
            input_weight: 1.0,
            max_outer: solver.max_outer,
            max_inner: solver.max_inner,
            tol_feas: solver.tol_feas,
            tol_stat: solver.tol_stat,
            jobs: None,
            output: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: BenchmarkConfig = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, BenchError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: String| Err(BenchError::Config(m));
        if self.robot.is_empty() {
            return fail("`robot` is required".into());
        }
        if self.n_mc == 0 {
            return fail("n_mc must be at least 1".into());
        }
        if !(self.m_excl > 0.0) {
            return fail(format!("m_excl must be positive, got {}", self.m_excl));
        }
        if self.modes.is_empty() {
            return fail("at least one mode is required".into());
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].contains(m) {
                return fail(format!("mode `{m}` listed twice"));
            }
        }
        if self.jobs == Some(0) {
            return fail("jobs must be at least 1".into());
        }
        self.objective(ObjectiveMode::None)
            .validate()
            .map_err(BenchError::Config)?;
        Ok(())
    }

    pub fn objective(&self, mode: ObjectiveMode) -> SingularityObjectiveParams {
        SingularityObjectiveParams {
            mode,
            w_m: self.w_m,
            epsilon: self.epsilon,
            eta1: self.eta1,
            eta2: self.eta2,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            tol_feas: self.tol_feas,
            tol_stat: self.tol_stat,
            ..SolverOptions::default()
        }
    }
}

/// The random stream of one sample.
pub fn sample_rng(seed: u64, sample_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_id);
    rng
}

/// Uniform configuration inside the joint box with `m(q) ≥ m_excl`.
pub fn sample_configuration<R: Rng>(model: &RobotModel, m_excl: f64, rng: &mut R) -> Result<Vec<f64>, BenchError> {
    for _ in 0..=REJECTION_BUDGET {
        let q: Vec<f64> = (0..model.dof)
            .map(|j| rng.random_range(model.q_min[j]..model.q_max[j]))
            .collect();
        if manipulability(model, &q).expect("sampled vector has model size") >= m_excl {
            return Ok(q);
        }
    }
    Err(BenchError::RejectionBudget(REJECTION_BUDGET))
}

/// Rest-to-rest endpoint pair `x_S = [q_0; 0]`, `x_T = [q_T; 0]`.
pub fn sample_endpoints<R: Rng>(model: &RobotModel, m_excl: f64, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>), BenchError> {
    let zeros = vec![0.0; model.dof];
    let q0 = sample_configuration(model, m_excl, rng)?;
    let qt = sample_configuration(model, m_excl, rng)?;
    Ok(([q0, zeros.clone()].concat(), [qt, zeros].concat()))
}

/// One solve of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub sample_id: u64,
    pub mode: ObjectiveMode,
    pub status: SolveStatus,
    pub t_f: Option<f64>,
    pub wall_time: f64,
    pub m_traj_min: Option<f64>,
    pub m_traj_max: Option<f64>,
    pub m_avg: Option<f64>,
    pub l_p: Option<f64>,
    pub l_quat: Option<f64>,
    pub iterations: usize,
    pub constraint_violation: f64,
    /// Hash of the endpoint pair; equal across modes for one sample.
    pub sample_hash: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample mean and (n−1) standard deviation; `NaN` when empty.
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

/// Aggregates of one mode over its converged records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: ObjectiveMode,
    pub samples: usize,
    pub converged: usize,
    pub convergence_rate: f64,
    pub t_f: MeanStd,
    pub wall_time: MeanStd,
    pub m_avg: MeanStd,
    pub l_p: MeanStd,
    pub l_quat: MeanStd,
    pub m_min: f64,
    pub m_max: f64,
    /// Order-dependent hash of all endpoint pairs of this mode.
    pub sample_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub robot: String,
    pub n_mc: usize,
    pub seed: u64,
    pub n: usize,
    pub m_excl: f64,
    pub modes: Vec<ModeSummary>,
}

impl BenchmarkSummary {
    pub fn mode(&self, mode: ObjectiveMode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    /// Sorted by sample id, then by the configured mode order.
    pub records: Vec<BenchmarkRecord>,
    pub summary: BenchmarkSummary,
}

/// 64-bit FNV-1a over the bit patterns of `values`.
pub fn hash_f64s(values: impl IntoIterator<Item = f64>, mut h: u64) -> u64 {
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn solve_record(
    model: &RobotModel,
    cfg: &BenchmarkConfig,
    sample_id: u64,
    mode: ObjectiveMode,
    x_s: &[f64],
    x_t: &[f64],
    sample_hash: u64,
) -> BenchmarkRecord {
    let m = model.dof;
    let failed = |status| BenchmarkRecord {
        sample_id,
        mode,
        status,
        t_f: None,
        wall_time: 0.0,
        m_traj_min: None,
        m_traj_max: None,
        m_avg: None,
        l_p: None,
        l_quat: None,
        iterations: 0,
        constraint_violation: f64::NAN,
        sample_hash,
    };
    let problem = match rest_to_rest(model, &x_s[..m], &x_t[..m], cfg.n, cfg.objective(mode)) {
        Ok(p) => p
            .with_t_min(cfg.t_min)
            .with_accel_bounds(cfg.accel_bound)
            .with_input_weight(cfg.input_weight),
        Err(_) => return failed(SolveStatus::Infeasible),
    };
    let sol: TrajectorySolution = match solve(&problem, &cfg.solver_options()) {
        Ok(s) => s,
        Err(_) => return failed(SolveStatus::Infeasible),
    };
    let mut rec = failed(sol.status);
    rec.wall_time = sol.diagnostics.wall_time;
    rec.iterations = sol.diagnostics.iterations;
    rec.constraint_violation = sol.diagnostics.constraint_violation;
    if sol.status == SolveStatus::Converged {
        let qs: Vec<&[f64]> = (0..sol.states.len()).map(|k| sol.q(k)).collect();
        let (lo, hi) = metric_m_min_max(model, [qs.as_slice()]);
        rec.t_f = Some(sol.t_f);
        rec.m_traj_min = Some(lo);
        rec.m_traj_max = Some(hi);
        rec.m_avg = Some(metric_m_avg(model, &qs));
        rec.l_p = Some(metric_path_length(model, &qs));
        rec.l_quat = Some(metric_quat_length(model, &qs));
    }
    rec
}

/// Runs every sample in every configured mode. `progress(done, total)` is
/// called after each finished sample.
pub fn run_benchmark(
    cfg: &BenchmarkConfig,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<BenchmarkRun, BenchError> {
    cfg.validate()?;
    let model = resolve_robot(&cfg.robot)?;
    let endpoints: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_mc as u64)
        .map(|id| sample_endpoints(&model, cfg.m_excl, &mut sample_rng(cfg.seed, id)))
        .collect::<Result<_, _>>()?;

    let done = AtomicUsize::new(0);
    let work = || -> Vec<Vec<BenchmarkRecord>> {
        endpoints
            .par_iter()
            .enumerate()
            .map(|(id, (x_s, x_t))| {
                let hash = hash_f64s(x_s.iter().chain(x_t).copied(), FNV_OFFSET);
                let recs = cfg
                    .modes
                    .iter()
                    .map(|&mode| solve_record(&model, cfg, id as u64, mode, x_s, x_t, hash))
                    .collect();
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(p) = progress {
                    p(finished, cfg.n_mc);
                }
                recs
            })
            .collect()
    };
    let per_sample = match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| BenchError::Config(format!("cannot start worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    let records: Vec<BenchmarkRecord> = per_sample.into_iter().flatten().collect();
    let summary = summarize(cfg, &records);
    Ok(BenchmarkRun { records, summary })
}

/// Per-mode aggregates over converged records.
pub fn summarize(cfg: &BenchmarkConfig, records: &[BenchmarkRecord]) -> BenchmarkSummary {
    let modes = cfg
        .modes
        .iter()
        .map(|&mode| {
            let recs: Vec<&BenchmarkRecord> = records.iter().filter(|r| r.mode == mode).collect();
            let ok: Vec<&BenchmarkRecord> = recs
                .iter()
                .copied()
                .filter(|r| r.status == SolveStatus::Converged)
                .collect();
            let col = |f: fn(&BenchmarkRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let walls: Vec<f64> = ok.iter().map(|r| r.wall_time).collect();
            let m_min = col(|r| r.m_traj_min).into_iter().fold(f64::INFINITY, f64::min);
            let m_max = col(|r| r.m_traj_max).into_iter().fold(f64::NEG_INFINITY, f64::max);
            let sample_hash = recs.iter().fold(FNV_OFFSET, |h, r| {
                hash_f64s([f64::from_bits(r.sample_hash)], h)
            });
            ModeSummary {
                mode,
                samples: recs.len(),
                converged: ok.len(),
                convergence_rate: if recs.is_empty() { 0.0 } else { ok.len() as f64 / recs.len() as f64 },
                t_f: MeanStd::of(&col(|r| r.t_f)),
                wall_time: MeanStd::of(&walls),
                m_avg: MeanStd::of(&col(|r| r.m_avg)),
                l_p: MeanStd::of(&col(|r| r.l_p)),
                l_quat: MeanStd::of(&col(|r| r.l_quat)),
                m_min,
                m_max,
                sample_hash,
            }
        })
        .collect();
    BenchmarkSummary {
        robot: cfg.robot.clone(),
        n_mc: cfg.n_mc,
        seed: cfg.seed,
        n: cfg.n,
        m_excl: cfg.m_excl,
        modes,
    }
}
