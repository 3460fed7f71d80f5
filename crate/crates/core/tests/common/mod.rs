#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singplan::kinematics::vee;
use singplan::singularity::{ConditionKind, ImplicitFn, SingularityCondition};
use singplan::{forward_kinematics, RobotModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform configuration inside the joint limits.
pub fn random_q<R: Rng>(model: &RobotModel, rng: &mut R) -> Vec<f64> {
    (0..model.dof)
        .map(|j| rng.random_range(model.q_min[j]..model.q_max[j]))
        .collect()
}

/// Central-difference geometric Jacobian built from forward kinematics only.
/// Angular rows come from `vee(Ṙ Rᵀ)`.
pub fn fd_jacobian(model: &RobotModel, q: &[f64], h: f64) -> Vec<[f64; 6]> {
    (0..model.dof)
        .map(|j| {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[j] += h;
            qm[j] -= h;
            let p = forward_kinematics(model, &qp).unwrap().pose;
            let n = forward_kinematics(model, &qm).unwrap().pose;
            let r0 = forward_kinematics(model, q).unwrap().pose.rotation;
            let dp: Vector3<f64> = (p.translation - n.translation) / (2.0 * h);
            let dr: Matrix3<f64> = (p.rotation - n.rotation) / (2.0 * h);
            let w = vee(&(dr * r0.transpose()));
            [dp.x, dp.y, dp.z, w.x, w.y, w.z]
        })
        .collect()
}

/// Draws a configuration on the manifold of `cond`. Pinned joints are set
/// directly; implicit equations are solved for one of their joints by a
/// sign-change scan followed by bisection. Other joints are uniform in
/// `[-π, π]`, ignoring limits, so manifolds outside the box are covered too.
pub fn on_manifold<R: Rng>(model: &RobotModel, cond: &SingularityCondition, rng: &mut R) -> Vec<f64> {
    loop {
        let mut q: Vec<f64> = (0..model.dof).map(|_| rng.random_range(-PI..PI)).collect();
        if place(model, &cond.kind, &mut q) {
            return q;
        }
    }
}

fn place(model: &RobotModel, kind: &ConditionKind, q: &mut [f64]) -> bool {
    match kind {
        ConditionKind::SingleJoint(t) => {
            q[t.joint - 1] = t.value;
            true
        }
        ConditionKind::TwoJoint(a, b) => {
            q[a.joint - 1] = a.value;
            q[b.joint - 1] = b.value;
            true
        }
        ConditionKind::Implicit(f) => solve_implicit(model, *f, q),
        ConditionKind::Conjunction(members) => {
            // pinned members first so the implicit solve sees final values
            let (implicit, pinned): (Vec<_>, Vec<_>) =
                members.iter().partition(|m| matches!(m, ConditionKind::Implicit(_)));
            pinned.into_iter().chain(implicit).all(|m| place(model, m, q))
        }
    }
}

fn solve_implicit(model: &RobotModel, f: ImplicitFn, q: &mut [f64]) -> bool {
    let joint = *f.joints().last().unwrap() - 1;
    let eval = |q: &mut [f64], v: f64| {
        q[joint] = v;
        f.eval(model, q, None)
    };
    const STEPS: usize = 720;
    let grid: Vec<f64> = (0..=STEPS).map(|i| -PI + 2.0 * PI * i as f64 / STEPS as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&v| eval(q, v)).collect();
    let brackets: Vec<usize> = (0..STEPS).filter(|&i| values[i] * values[i + 1] <= 0.0).collect();
    let Some(&i) = brackets.first() else {
        return false;
    };
    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    let mut f_lo = values[i];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f_mid = eval(q, mid);
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    q[joint] = 0.5 * (lo + hi);
    true
}
