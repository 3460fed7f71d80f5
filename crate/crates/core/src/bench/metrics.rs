//! Trajectory quality metrics evaluated on the solution grid.

use nalgebra::Vector3;

use crate::kinematics::{forward_kinematics, rotation_to_quaternion, Quaternion};
use crate::model::RobotModel;
use crate::singularity::manipulability;

/// Mean of `m(q_k)` over the grid.
pub fn metric_m_avg(model: &RobotModel, qs: &[&[f64]]) -> f64 {
    if qs.is_empty() {
        return 0.0;
    }
    qs.iter().map(|q| m_of(model, q)).sum::<f64>() / qs.len() as f64
}

/// Smallest and largest `m(q_k)` over every grid point of every trajectory.
pub fn metric_m_min_max<'a>(model: &RobotModel, trajectories: impl IntoIterator<Item = &'a [&'a [f64]]>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for traj in trajectories {
        for q in traj {
            let m = m_of(model, q);
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    (lo, hi)
}

/// Polyline length of the end-effector path through the grid points.
pub fn metric_path_length(model: &RobotModel, qs: &[&[f64]]) -> f64 {
    let points: Vec<_> = qs
        .iter()
        .map(|q| forward_kinematics(model, q).expect("joint vector of model size").pose.translation)
        .collect();
    polyline_length(&points)
}

/// Sum of segment lengths.
pub fn polyline_length(points: &[Vector3<f64>]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// `Σ_k 1 − quat(R_k)ᵀ quat(R_{k−1})`, with each quaternion sign-flipped
/// into the hemisphere of its predecessor first.
pub fn metric_quat_length(model: &RobotModel, qs: &[&[f64]]) -> f64 {
    let quats: Vec<Quaternion> = qs
        .iter()
        .map(|q| {
            let pose = forward_kinematics(model, q).expect("joint vector of model size").pose;
            rotation_to_quaternion(&pose.rotation).expect("forward kinematics yields rotations")
        })
        .collect();
    quat_path_length(&quats)
}

/// The rotation-distance sum on an explicit quaternion sequence.
pub fn quat_path_length(quats: &[Quaternion]) -> f64 {
    let mut total = 0.0;
    let mut prev = match quats.first() {
        Some(q) => *q,
        None => return 0.0,
    };
    for q in &quats[1..] {
        let q = if q.dot(&prev) < 0.0 { q.negated() } else { *q };
        total += 1.0 - q.dot(&prev);
        prev = q;
    }
    total
}

fn m_of(model: &RobotModel, q: &[f64]) -> f64 {
    manipulability(model, q).expect("joint vector of model size")
}
