//! DH forward kinematics, geometric Jacobians and rotation/quaternion
//! conversion.
//!
//! Joint limits are deliberately not checked here: solvers and line searches
//! evaluate configurations outside the admissible box.

use nalgebra::{Matrix3, Matrix4, Matrix6xX, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::KinematicsError;
use crate::model::{DhConvention, RobotModel};

/// Rigid transform `[R p; 0 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// End-effector pose in the world frame.
pub type Pose = Transform;

impl Transform {
    pub fn identity() -> Self {
        Transform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        h
    }
}

impl std::ops::Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Standard DH link transform `Rz(θ) Tz(d) Tx(a) Rx(α)`.
pub fn dh_transform(theta: f64, d: f64, a: f64, alpha: f64) -> Transform {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    Transform {
        rotation: Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca),
        translation: Vector3::new(a * ct, a * st, d),
    }
}

/// Modified (Craig) DH link transform `Rx(α) Tx(a) Rz(θ) Tz(d)`.
pub fn modified_dh_transform(theta: f64, d: f64, a: f64, alpha: f64) -> Transform {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    Transform {
        rotation: Matrix3::new(ct, -st, 0.0, st * ca, ct * ca, -sa, st * sa, ct * sa, ca),
        translation: Vector3::new(a, -sa * d, ca * d),
    }
}

pub(crate) fn check_joints(model: &RobotModel, q: &[f64]) -> Result<(), KinematicsError> {
    if q.len() != model.dof {
        return Err(KinematicsError::DimensionMismatch {
            expected: model.dof,
            actual: q.len(),
        });
    }
    if let Some(i) = q.iter().position(|v| !v.is_finite()) {
        return Err(KinematicsError::NonFinite(i));
    }
    Ok(())
}

/// Output of [`forward_kinematics`].
#[derive(Debug, Clone)]
pub struct ForwardKinematics {
    /// End-effector pose (the last frame).
    pub pose: Pose,
    /// Cumulative world transforms after each DH row, fixed rows included.
    pub frames: Vec<Transform>,
    /// World-frame rotation axis and a point on it, one per joint.
    pub joint_axes: Vec<(Vector3<f64>, Vector3<f64>)>,
}

pub fn forward_kinematics(
    model: &RobotModel,
    q: &[f64],
) -> Result<ForwardKinematics, KinematicsError> {
    check_joints(model, q)?;
    let mut frames = Vec::with_capacity(model.rows.len());
    let mut joint_axes = Vec::with_capacity(model.dof);
    let mut current = Transform::identity();
    for row in &model.rows {
        let theta = row.theta_offset + row.joint.map_or(0.0, |j| q[j - 1]);
        current = match model.convention {
            DhConvention::Standard => {
                if row.joint.is_some() {
                    joint_axes.push((current.rotation.column(2).into_owned(), current.translation));
                }
                current * dh_transform(theta, row.d, row.a, row.alpha)
            }
            DhConvention::Modified => {
                let next = current * modified_dh_transform(theta, row.d, row.a, row.alpha);
                if row.joint.is_some() {
                    joint_axes.push((next.rotation.column(2).into_owned(), next.translation));
                }
                next
            }
        };
        frames.push(current);
    }
    Ok(ForwardKinematics {
        pose: current,
        frames,
        joint_axes,
    })
}

/// End-effector pose only.
pub fn end_effector_pose(model: &RobotModel, q: &[f64]) -> Result<Pose, KinematicsError> {
    forward_kinematics(model, q).map(|fk| fk.pose)
}

/// Frame a Jacobian's rows are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianFrame {
    World,
    EndEffector,
}

/// 6×M geometric Jacobian; rows 1–3 linear velocity, rows 4–6 angular.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: Matrix6xX<f64>,
    pub frame: JacobianFrame,
}

impl JacobianMatrix {
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .matrix
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

pub(crate) fn jacobian_from_fk(fk: &ForwardKinematics) -> Matrix6xX<f64> {
    let p = fk.pose.translation;
    let mut j = Matrix6xX::zeros(fk.joint_axes.len());
    for (i, (z, o)) in fk.joint_axes.iter().enumerate() {
        let lin = z.cross(&(p - o));
        let mut col = j.column_mut(i);
        col[0] = lin.x;
        col[1] = lin.y;
        col[2] = lin.z;
        col[3] = z.x;
        col[4] = z.y;
        col[5] = z.z;
    }
    j
}

/// Geometric Jacobian in the world frame, revolute joints only.
pub fn geometric_jacobian(
    model: &RobotModel,
    q: &[f64],
) -> Result<JacobianMatrix, KinematicsError> {
    let fk = forward_kinematics(model, q)?;
    Ok(JacobianMatrix {
        matrix: jacobian_from_fk(&fk),
        frame: JacobianFrame::World,
    })
}

/// Rotates both row blocks of a world Jacobian by `rotationᵀ`.
pub(crate) fn rotate_rows(j: &Matrix6xX<f64>, rotation: &Matrix3<f64>) -> Matrix6xX<f64> {
    let rt = rotation.transpose();
    let mut out = j.clone();
    for c in 0..j.ncols() {
        let lin = rt * Vector3::new(j[(0, c)], j[(1, c)], j[(2, c)]);
        let ang = rt * Vector3::new(j[(3, c)], j[(4, c)], j[(5, c)]);
        for r in 0..3 {
            out[(r, c)] = lin[r];
            out[(r + 3, c)] = ang[r];
        }
    }
    out
}

/// Geometric Jacobian expressed in the end-effector frame:
/// `blockdiag(Rᵀ, Rᵀ) J`.
pub fn jacobian_ee_frame(
    model: &RobotModel,
    q: &[f64],
) -> Result<JacobianMatrix, KinematicsError> {
    let fk = forward_kinematics(model, q)?;
    let world = jacobian_from_fk(&fk);
    Ok(JacobianMatrix {
        matrix: rotate_rows(&world, &fk.pose.rotation),
        frame: JacobianFrame::EndEffector,
    })
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn negated(&self) -> Quaternion {
        Quaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn to_rotation(&self) -> Matrix3<f64> {
        let Quaternion { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }
}

/// Shepperd's method: pick the largest of the four squared components to
/// divide by, so every trace regime stays well conditioned. Returns `w ≥ 0`.
pub fn rotation_to_quaternion(r: &Matrix3<f64>) -> Result<Quaternion, KinematicsError> {
    let dev = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !(dev <= 1e-9) || !(r.determinant() > 0.0) {
        return Err(KinematicsError::NonOrthonormal(if dev.is_finite() { dev } else { f64::INFINITY }));
    }
    let trace = r.trace();
    let cands = [trace, r[(0, 0)], r[(1, 1)], r[(2, 2)]];
    let (k, _) = cands
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let q = match k {
        0 => {
            let s = 2.0 * (1.0 + trace).sqrt();
            Quaternion {
                w: 0.25 * s,
                x: (r[(2, 1)] - r[(1, 2)]) / s,
                y: (r[(0, 2)] - r[(2, 0)]) / s,
                z: (r[(1, 0)] - r[(0, 1)]) / s,
            }
        }
        1 => {
            let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
            Quaternion {
                w: (r[(2, 1)] - r[(1, 2)]) / s,
                x: 0.25 * s,
                y: (r[(0, 1)] + r[(1, 0)]) / s,
                z: (r[(0, 2)] + r[(2, 0)]) / s,
            }
        }
        2 => {
            let s = 2.0 * (1.0 - r[(0, 0)] + r[(1, 1)] - r[(2, 2)]).sqrt();
            Quaternion {
                w: (r[(0, 2)] - r[(2, 0)]) / s,
                x: (r[(0, 1)] + r[(1, 0)]) / s,
                y: 0.25 * s,
                z: (r[(1, 2)] + r[(2, 1)]) / s,
            }
        }
        _ => {
            let s = 2.0 * (1.0 - r[(0, 0)] - r[(1, 1)] + r[(2, 2)]).sqrt();
            Quaternion {
                w: (r[(1, 0)] - r[(0, 1)]) / s,
                x: (r[(0, 2)] + r[(2, 0)]) / s,
                y: (r[(1, 2)] + r[(2, 1)]) / s,
                z: 0.25 * s,
            }
        }
    };
    // renormalize away the O(dev) drift of slightly non-orthonormal inputs
    let n = q.norm();
    let q = Quaternion {
        w: q.w / n,
        x: q.x / n,
        y: q.y / n,
        z: q.z / n,
    };
    Ok(if q.w < 0.0 { q.negated() } else { q })
}

/// `vee(S)` for a skew-symmetric `S`, averaging the mirrored entries.
pub fn vee(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (s[(2, 1)] - s[(1, 2)]),
        0.5 * (s[(0, 2)] - s[(2, 0)]),
        0.5 * (s[(1, 0)] - s[(0, 1)]),
    )
}
