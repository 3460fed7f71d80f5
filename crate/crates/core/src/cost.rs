//! Singularity-avoidance objective terms: inverse manipulability and the sum
//! of exponential potentials over registered singular manifolds.

use serde::{Deserialize, Serialize};

use crate::error::{KinematicsError, SingularityError};
use crate::kinematics::{check_joints, forward_kinematics};
use crate::model::RobotModel;
use crate::singularity::{manipulability, SingularityCondition};

/// Central-difference step (rad) for the manipulability gradient.
pub const MANIPULABILITY_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Pure time/effort objective.
    #[serde(alias = "plain")]
    None,
    /// `w_m / (m(q) + ε)`.
    #[serde(alias = "manipmax", alias = "manip_max")]
    ManipulabilityMax,
    /// `w_m Σ exp(η1 − η2 ψ_i(q))`.
    #[serde(alias = "proposed", alias = "potential")]
    PotentialFunctions,
}

impl ObjectiveMode {
    pub const ALL: [ObjectiveMode; 3] = [
        ObjectiveMode::None,
        ObjectiveMode::ManipulabilityMax,
        ObjectiveMode::PotentialFunctions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveMode::None => "none",
            ObjectiveMode::ManipulabilityMax => "manipulability_max",
            ObjectiveMode::PotentialFunctions => "potential_functions",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "none" | "plain" => Some(ObjectiveMode::None),
            "manipulability_max" | "manipmax" | "manip_max" => Some(ObjectiveMode::ManipulabilityMax),
            "potential_functions" | "proposed" | "potential" => Some(ObjectiveMode::PotentialFunctions),
            _ => None,
        }
    }
}

impl std::fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingularityObjectiveParams {
    pub mode: ObjectiveMode,
    pub w_m: f64,
    pub epsilon: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for SingularityObjectiveParams {
    fn default() -> Self {
        SingularityObjectiveParams {
            mode: ObjectiveMode::PotentialFunctions,
            w_m: 100.0,
            epsilon: 1e-6,
            eta1: 2400f64.ln(),
            eta2: 400.0,
        }
    }
}

impl SingularityObjectiveParams {
    pub fn with_mode(mode: ObjectiveMode) -> Self {
        SingularityObjectiveParams {
            mode,
            ..Default::default()
        }
    }

    /// Checks positivity of every parameter, returning the offending name.
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("w_m", self.w_m),
            ("epsilon", self.epsilon),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }
}

/// `w_m / (m(q) + ε)`.
pub fn manipulability_cost(
    model: &RobotModel,
    q: &[f64],
    params: &SingularityObjectiveParams,
) -> Result<f64, KinematicsError> {
    Ok(params.w_m / (manipulability(model, q)? + params.epsilon))
}

/// Residual `ψ` of one registered condition; zero exactly on its manifold.
pub fn psi(
    model: &RobotModel,
    cond: &SingularityCondition,
    q: &[f64],
) -> Result<f64, SingularityError> {
    check_joints(model, q)?;
    if model.condition(&cond.id) != Some(cond) {
        return Err(SingularityError::UnknownCondition(cond.id.clone()));
    }
    Ok(cond.kind.residual(model, q, None))
}

/// `exp(η1 − η2 ψ)`.
pub fn potential(psi_value: f64, params: &SingularityObjectiveParams) -> f64 {
    (params.eta1 - params.eta2 * psi_value).exp()
}

/// `w_m Σ_i exp(η1 − η2 ψ_i(q))` over every registered condition.
pub fn potential_cost(
    model: &RobotModel,
    q: &[f64],
    params: &SingularityObjectiveParams,
) -> Result<f64, KinematicsError> {
    check_joints(model, q)?;
    Ok(potential_cost_grad(model, q, params, None))
}

fn potential_cost_grad(
    model: &RobotModel,
    q: &[f64],
    params: &SingularityObjectiveParams,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let mut total = 0.0;
    for cond in &model.singularity_conditions {
        let r = cond.kind.residual(model, q, None);
        let phi = potential(r, params);
        total += phi;
        if let Some(g) = grad.as_deref_mut() {
            // skip far-away manifolds whose contribution underflows anyway
            if phi > 0.0 {
                cond.kind
                    .residual(model, q, Some((g, -params.w_m * params.eta2 * phi)));
            }
        }
    }
    params.w_m * total
}

/// Value of the singularity term selected by `params.mode`.
pub fn singularity_cost(
    model: &RobotModel,
    q: &[f64],
    params: &SingularityObjectiveParams,
) -> Result<f64, KinematicsError> {
    match params.mode {
        ObjectiveMode::None => {
            check_joints(model, q)?;
            Ok(0.0)
        }
        ObjectiveMode::ManipulabilityMax => manipulability_cost(model, q, params),
        ObjectiveMode::PotentialFunctions => potential_cost(model, q, params),
    }
}

/// Gradient of the singularity term. Analytic for potentials; central
/// differences of `m(q)` for the manipulability term.
pub fn cost_gradient(
    model: &RobotModel,
    q: &[f64],
    params: &SingularityObjectiveParams,
) -> Result<Vec<f64>, KinematicsError> {
    check_joints(model, q)?;
    let mut g = vec![0.0; model.dof];
    cost_and_gradient_into(model, q, params, &mut g);
    Ok(g)
}

/// Value of the singularity term without argument checks.
pub(crate) fn cost_value(model: &RobotModel, q: &[f64], params: &SingularityObjectiveParams) -> f64 {
    match params.mode {
        ObjectiveMode::None => 0.0,
        ObjectiveMode::ManipulabilityMax => {
            params.w_m / (manipulability(model, q).expect("checked joint vector") + params.epsilon)
        }
        ObjectiveMode::PotentialFunctions => potential_cost_grad(model, q, params, None),
    }
}

/// Adds the gradient of the singularity term into `grad` and returns its
/// value. `q` must already have length `model.dof` and be finite.
pub(crate) fn cost_and_gradient_into(
    model: &RobotModel,
    q: &[f64],
    params: &SingularityObjectiveParams,
    grad: &mut [f64],
) -> f64 {
    match params.mode {
        ObjectiveMode::None => 0.0,
        ObjectiveMode::PotentialFunctions => potential_cost_grad(model, q, params, Some(grad)),
        ObjectiveMode::ManipulabilityMax => {
            let mut dm = vec![0.0; grad.len()];
            let m0 = manipulability_with_fd_gradient(model, q, &mut dm);
            let denom = m0 + params.epsilon;
            let scale = -params.w_m / (denom * denom);
            for (g, d) in grad.iter_mut().zip(&dm) {
                *g += scale * d;
            }
            params.w_m / denom
        }
    }
}

/// `m(q)` and its central-difference gradient with step
/// `MANIPULABILITY_FD_STEP`.
///
/// Perturbing joint `j` rigidly rotates every distal joint axis and the end
/// effector about axis `j`, so the perturbed Jacobians are rebuilt from one
/// forward-kinematics pass instead of `2M` fresh ones.
pub(crate) fn manipulability_with_fd_gradient(model: &RobotModel, q: &[f64], dm: &mut [f64]) -> f64 {
    let fk = forward_kinematics(model, q).expect("checked joint vector");
    let axes: Vec<[f64; 6]> = fk
        .joint_axes
        .iter()
        .map(|(z, o)| [z.x, z.y, z.z, o.x, o.y, o.z])
        .collect();
    let p = fk.pose.translation;
    let p = [p.x, p.y, p.z];
    let m0 = gram_manipulability(&axes, &p);
    let (s, c) = MANIPULABILITY_FD_STEP.sin_cos();
    let mut moved = axes.clone();
    for j in 0..axes.len() {
        let k = [axes[j][0], axes[j][1], axes[j][2]];
        let pivot = [axes[j][3], axes[j][4], axes[j][5]];
        let mut values = [0.0; 2];
        for (slot, sign) in [(0, 1.0), (1, -1.0)] {
            let rot = |v: [f64; 3]| rodrigues(k, c, sign * s, v);
            let rot_point = |v: [f64; 3]| {
                let r = rot([v[0] - pivot[0], v[1] - pivot[1], v[2] - pivot[2]]);
                [r[0] + pivot[0], r[1] + pivot[1], r[2] + pivot[2]]
            };
            for i in j + 1..axes.len() {
                let z = rot([axes[i][0], axes[i][1], axes[i][2]]);
                let o = rot_point([axes[i][3], axes[i][4], axes[i][5]]);
                moved[i] = [z[0], z[1], z[2], o[0], o[1], o[2]];
            }
            values[slot] = gram_manipulability(&moved, &rot_point(p));
        }
        moved[j + 1..].copy_from_slice(&axes[j + 1..]);
        dm[j] = (values[0] - values[1]) / (2.0 * MANIPULABILITY_FD_STEP);
    }
    m0
}

fn rodrigues(k: [f64; 3], c: f64, s: f64, v: [f64; 3]) -> [f64; 3] {
    let kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    let cross = [k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]];
    [
        c * v[0] + s * cross[0] + (1.0 - c) * kv * k[0],
        c * v[1] + s * cross[1] + (1.0 - c) * kv * k[1],
        c * v[2] + s * cross[2] + (1.0 - c) * kv * k[2],
    ]
}

/// `sqrt(det(J Jᵀ))` from joint axes `[z; o]` and the end-effector point,
/// through a Cholesky factorization of the 6×6 Gram matrix. A failed
/// factorization means the Gram matrix is numerically singular.
fn gram_manipulability(axes: &[[f64; 6]], p: &[f64; 3]) -> f64 {
    if axes.len() < 6 {
        return 0.0;
    }
    let mut a = [[0.0f64; 6]; 6];
    for ax in axes {
        let r = [p[0] - ax[3], p[1] - ax[4], p[2] - ax[5]];
        let col = [
            ax[1] * r[2] - ax[2] * r[1],
            ax[2] * r[0] - ax[0] * r[2],
            ax[0] * r[1] - ax[1] * r[0],
            ax[0],
            ax[1],
            ax[2],
        ];
        for r in 0..6 {
            for c in 0..=r {
                a[r][c] += col[r] * col[c];
            }
        }
    }
    let mut det_sqrt = 1.0;
    for j in 0..6 {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 0.0) {
            return 0.0;
        }
        let l = d.sqrt();
        a[j][j] = l;
        det_sqrt *= l;
        for i in j + 1..6 {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / l;
        }
    }
    det_sqrt
}
