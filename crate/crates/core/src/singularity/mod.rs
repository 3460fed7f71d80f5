//! Singularity index, per-condition residual reports and the minor-based
//! rank machinery.

pub mod blocks;
pub mod conditions;
pub mod symbolic;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix6, Matrix6xX};
use serde::{Deserialize, Serialize};

use crate::error::{KinematicsError, SingularityError};
use crate::kinematics::{forward_kinematics, jacobian_from_fk};
use crate::model::RobotModel;

pub use blocks::{isolated_rank_blocks, RankBlocks};
pub use conditions::{
    condition_residual, wrap_angle, ConditionKind, ImplicitFn, JointTarget, SingularityCondition,
};
pub use symbolic::{symbolic_manipulability_sq, verify_symbolic, SymbolicCheck};

/// A configuration with `m(q)` at or below this value counts as singular.
pub const SINGULAR_M_THRESHOLD: f64 = 1e-8;
/// A configuration with `σ_min(J)` at or below this value counts as singular.
pub const SINGULAR_SIGMA_THRESHOLD: f64 = 1e-9;

/// Sum of squared maximal minors of a wide matrix, i.e. `det(A Aᵀ)` by
/// Cauchy–Binet. Returns 0 when there are fewer columns than rows.
pub fn sum_squared_maximal_minors(a: &DMatrix<f64>) -> f64 {
    let (r, c) = a.shape();
    if c < r {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    let mut total = 0.0;
    loop {
        let sub = a.select_columns(idx.iter());
        let d = sub.determinant();
        total += d * d;
        // next r-combination of 0..c in lexicographic order
        let mut i = r;
        loop {
            if i == 0 {
                return total;
            }
            i -= 1;
            if idx[i] != i + c - r {
                break;
            }
            if i == 0 {
                return total;
            }
        }
        idx[i] += 1;
        for k in i + 1..r {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// `det(A Aᵀ)` of a 3×4 matrix as the sum of its four squared 3×3 minors.
pub fn cauchy_binet_det(a: &DMatrix<f64>) -> Result<f64, SingularityError> {
    if a.shape() != (3, 4) {
        return Err(SingularityError::ShapeMismatch {
            expected: "3x4".into(),
            actual: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    Ok(sum_squared_maximal_minors(a))
}

/// `det(J Jᵀ)` of a 6×M Jacobian.
pub(crate) fn jacobian_gram_det(j: &Matrix6xX<f64>) -> f64 {
    let m = j.ncols();
    match m {
        0..=5 => 0.0,
        6 => {
            let d = Matrix6::from_iterator(j.iter().copied()).determinant();
            d * d
        }
        7 => {
            let mut total = 0.0;
            for skip in 0..7 {
                let mut sub = Matrix6::zeros();
                let mut col = 0;
                for c in (0..7).filter(|&c| c != skip) {
                    sub.set_column(col, &j.column(c));
                    col += 1;
                }
                let d = sub.determinant();
                total += d * d;
            }
            total
        }
        _ => sum_squared_maximal_minors(&DMatrix::from_iterator(6, m, j.iter().copied())),
    }
}

/// Singularity index `m(q) = sqrt(det(J Jᵀ))` of the world-frame Jacobian.
pub fn manipulability(model: &RobotModel, q: &[f64]) -> Result<f64, KinematicsError> {
    let fk = forward_kinematics(model, q)?;
    Ok(jacobian_gram_det(&jacobian_from_fk(&fk)).max(0.0).sqrt())
}

/// Singularity summary of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub m: f64,
    pub sigma_min: f64,
    pub residuals: BTreeMap<String, f64>,
    pub nearest_condition: Option<String>,
    pub singular: bool,
}

pub fn analyze(model: &RobotModel, q: &[f64]) -> Result<SingularityReport, KinematicsError> {
    let fk = forward_kinematics(model, q)?;
    let j = jacobian_from_fk(&fk);
    let m = jacobian_gram_det(&j).max(0.0).sqrt();
    let sv = j.clone().svd(false, false).singular_values;
    let sigma_min = if j.ncols() < 6 {
        0.0
    } else {
        sv.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let residuals: BTreeMap<String, f64> = model
        .singularity_conditions
        .iter()
        .map(|c| (c.id.clone(), c.kind.residual(model, q, None)))
        .collect();
    let mut nearest: Option<(&String, f64)> = None;
    for (id, &r) in &residuals {
        if nearest.map_or(true, |(_, best)| r < best) {
            nearest = Some((id, r));
        }
    }
    Ok(SingularityReport {
        m,
        sigma_min,
        nearest_condition: nearest.map(|(id, _)| id.clone()),
        singular: m <= SINGULAR_M_THRESHOLD || sigma_min <= SINGULAR_SIGMA_THRESHOLD,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::geometric_jacobian;
    use crate::model::{shipped_model, RobotFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(model: &RobotModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..model.dof)
            .map(|j| rng.random_range(model.q_min[j]..model.q_max[j]))
            .collect()
    }

    #[test]
    fn cauchy_binet_small_cases() {
        let mut a = DMatrix::zeros(3, 4);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        a[(2, 2)] = 1.0;
        assert_eq!(cauchy_binet_det(&a).unwrap(), 1.0);

        let rank2 = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(cauchy_binet_det(&rank2).unwrap().abs() < 1e-24);

        assert!(matches!(
            cauchy_binet_det(&DMatrix::zeros(3, 3)),
            Err(SingularityError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn gram_det_matches_direct_product_away_from_singularity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for family in [RobotFamily::Comau, RobotFamily::Iiwa, RobotFamily::Panda] {
            let model = shipped_model(family);
            for _ in 0..50 {
                let q = random_q(&model, &mut rng);
                let j = geometric_jacobian(&model, &q).unwrap().matrix;
                let direct = (&j * j.transpose()).determinant();
                let cb = jacobian_gram_det(&j);
                assert!((direct - cb).abs() <= 1e-10 * direct.abs().max(1e-6));
            }
        }
    }

    #[test]
    fn manipulability_is_product_of_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = shipped_model(RobotFamily::Iiwa);
        for _ in 0..50 {
            let q = random_q(&model, &mut rng);
            let j = geometric_jacobian(&model, &q).unwrap();
            let prod: f64 = j.singular_values().iter().product();
            let m = manipulability(&model, &q).unwrap();
            assert!((m - prod).abs() <= 1e-10 * prod);
        }
    }

    #[test]
    fn iiwa_zero_pose_report() {
        let model = shipped_model(RobotFamily::Iiwa);
        let rep = analyze(&model, &[0.0; 7]).unwrap();
        assert!(rep.m <= SINGULAR_M_THRESHOLD);
        assert!(rep.singular);
        // q2 = q4 = q6 = 0 lies on several manifolds; ties go to the smallest id
        assert_eq!(rep.nearest_condition.as_deref(), Some("iiwa.A"));
        assert_eq!(rep.residuals["iiwa.A"], 0.0);
        assert_eq!(rep.residuals.len(), model.singularity_conditions.len());
    }

    #[test]
    fn comau_elbow_bent_pose_is_regular() {
        let model = shipped_model(RobotFamily::Comau);
        let q = [0.2, 0.3, -0.8, 0.5, 1.3, 0.4];
        let rep = analyze(&model, &q).unwrap();
        assert!(rep.m > 0.1, "m = {}", rep.m);
        assert!(rep.residuals.values().all(|&r| r > 0.01), "{:?}", rep.residuals);
        assert!(!rep.singular);
    }

    #[test]
    fn comau_wrist_flip_is_singular() {
        let model = shipped_model(RobotFamily::Comau);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let mut q = random_q(&model, &mut rng);
            q[4] = 0.0;
            assert!(manipulability(&model, &q).unwrap() <= SINGULAR_M_THRESHOLD);
        }
    }
}
