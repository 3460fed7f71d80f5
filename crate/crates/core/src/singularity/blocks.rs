//! Row operations that make the Jacobian block lower-triangular,
//! `[[J11, 0], [J21, J22]]`, so the rank test splits into an arm block and a
//! wrist block.
//!
//! The Jacobian is first expressed in the wrist frame (the frame preceding the
//! last joint row). For spherical wrists the linear rows are shifted to the
//! wrist centre, `v_w = v_e + r × ω`; otherwise the wrist columns of the linear
//! rows are eliminated with the Schur complement of the wrist block.

use nalgebra::{DMatrix, Matrix3, Matrix6xX, Vector3};

use crate::error::SingularityError;
use crate::kinematics::{check_joints, forward_kinematics, jacobian_from_fk, rotate_rows, Transform};
use crate::model::{RobotFamily, RobotModel};

/// `|det(J22)|` below this makes the Schur elimination undefined.
pub const WRIST_BLOCK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RankBlocks {
    /// The full transformed 6×M matrix.
    pub transformed: Matrix6xX<f64>,
    /// Rows 1–3, columns 1..M−3.
    pub j11: DMatrix<f64>,
    /// Rows 4–6, columns M−2..M.
    pub j22: Matrix3<f64>,
}

pub fn isolated_rank_blocks(model: &RobotModel, q: &[f64]) -> Result<RankBlocks, SingularityError> {
    check_joints(model, q)?;
    let family = match (model.family(), model.dof) {
        (Some(f @ (RobotFamily::Iiwa | RobotFamily::Panda)), 7) => f,
        (Some(f @ RobotFamily::Comau), 6) => f,
        _ => return Err(SingularityError::UnsupportedModel(model.name.clone())),
    };
    let fk = forward_kinematics(model, q)?;
    let last_row = model
        .rows
        .iter()
        .rposition(|r| r.joint.is_some())
        .expect("validated model has joint rows");
    let wrist = if last_row == 0 {
        Transform::identity()
    } else {
        fk.frames[last_row - 1]
    };
    let mut j = rotate_rows(&jacobian_from_fk(&fk), &wrist.rotation);
    let m = model.dof;

    match family {
        RobotFamily::Comau | RobotFamily::Iiwa => {
            let r = wrist.rotation.transpose() * (fk.pose.translation - wrist.translation);
            for c in 0..m {
                let w = Vector3::new(j[(3, c)], j[(4, c)], j[(5, c)]);
                let shift = r.cross(&w);
                for k in 0..3 {
                    j[(k, c)] += shift[k];
                }
            }
        }
        RobotFamily::Panda => {
            let d: Matrix3<f64> = j.fixed_view::<3, 3>(3, m - 3).into_owned();
            if d.determinant().abs() < WRIST_BLOCK_TOLERANCE {
                return Err(SingularityError::SingularWristBlock);
            }
            let b: Matrix3<f64> = j.fixed_view::<3, 3>(0, m - 3).into_owned();
            let gain = b * d.try_inverse().ok_or(SingularityError::SingularWristBlock)?;
            let lower = j.rows(3, 3).into_owned();
            let upper = j.rows(0, 3) - gain * lower;
            j.rows_mut(0, 3).copy_from(&upper);
            for r in 0..3 {
                for c in m - 3..m {
                    j[(r, c)] = 0.0;
                }
            }
        }
    }

    let j11 = DMatrix::from_fn(3, m - 3, |r, c| j[(r, c)]);
    let j22 = j.fixed_view::<3, 3>(3, m - 3).into_owned();
    Ok(RankBlocks {
        transformed: j,
        j11,
        j22,
    })
}
