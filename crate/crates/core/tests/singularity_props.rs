mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use singplan::singularity::{
    cauchy_binet_det, condition_residual, isolated_rank_blocks, sum_squared_maximal_minors,
    symbolic_manipulability_sq, wrap_angle, SINGULAR_M_THRESHOLD,
};
use singplan::*;

fn robot_and_q() -> impl Strategy<Value = (RobotModel, Vec<f64>)> {
    (0..3usize).prop_flat_map(|i| {
        let model = shipped_models().swap_remove(i);
        let ranges: Vec<_> = model.q_min.iter().zip(&model.q_max).map(|(&a, &b)| a..b).collect();
        ranges.prop_map(move |q| (model.clone(), q))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn cauchy_binet_matches_gram_determinant(entries in prop::collection::vec(-3.0f64..3.0, 12)) {
        let a = DMatrix::from_row_slice(3, 4, &entries);
        let det = (&a * a.transpose()).determinant();
        let minors = cauchy_binet_det(&a).unwrap();
        prop_assert!((minors - det).abs() <= 1e-12 * det.abs().max(1.0));
        prop_assert!(minors >= 0.0);
        prop_assert_eq!(minors, sum_squared_maximal_minors(&a));
    }

    #[test]
    fn residuals_are_nonnegative_and_report_is_consistent((model, q) in robot_and_q()) {
        let report = analyze(&model, &q).unwrap();
        prop_assert!(report.residuals.values().all(|&r| r >= 0.0 && r.is_finite()));
        prop_assert_eq!(report.residuals.len(), model.singularity_conditions.len());
        let nearest = report.nearest_condition.clone().unwrap();
        let best = report.residuals.values().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(report.residuals[&nearest], best);
        prop_assert_eq!(report.singular, report.m <= SINGULAR_M_THRESHOLD || report.sigma_min <= 1e-9);
        prop_assert!((report.m - manipulability(&model, &q).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_agrees_with_numeric((model, q) in robot_and_q()) {
        prop_assume!(model.family() != Some(RobotFamily::Panda));
        let m = manipulability(&model, &q).unwrap();
        prop_assume!(m > 1e-4);
        let sym = symbolic_manipulability_sq(&model, &q).unwrap();
        prop_assert!((sym - m * m).abs() <= 1e-9 * m * m, "{} vs {}", sym, m * m);
    }

    #[test]
    fn block_transform_preserves_rank((model, q) in robot_and_q()) {
        let blocks = isolated_rank_blocks(&model, &q).unwrap();
        let rank_t = blocks.transformed.svd(false, false).rank(1e-9);
        let rank_j = geometric_jacobian(&model, &q).unwrap().matrix.svd(false, false).rank(1e-9);
        prop_assert_eq!(rank_t, rank_j);
    }

    #[test]
    fn wrapped_angle_is_in_half_open_interval(d in -50.0f64..50.0) {
        let w = wrap_angle(d);
        prop_assert!(w > -PI && w <= PI);
        let k = ((d - w) / (2.0 * PI)).round();
        prop_assert!((d - w - 2.0 * PI * k).abs() < 1e-9);
    }
}

#[test]
fn every_registered_manifold_is_singular() {
    let mut rng = common::rng(42);
    for model in shipped_models() {
        for cond in &model.singularity_conditions {
            for _ in 0..50 {
                let q = common::on_manifold(&model, cond, &mut rng);
                assert!(condition_residual(&model, &cond.id, &q).unwrap() < 1e-20, "{}", cond.id);
                let m = manipulability(&model, &q).unwrap();
                assert!(m <= SINGULAR_M_THRESHOLD, "{}: m = {m:e} at {q:?}", cond.id);
            }
        }
    }
}

#[test]
fn comau_wrist_block_closed_form_on_random_poses() {
    let model = shipped_model(RobotFamily::Comau);
    let mut rng = common::rng(8);
    for _ in 0..100 {
        let q = common::random_q(&model, &mut rng);
        let j22 = isolated_rank_blocks(&model, &q).unwrap().j22;
        let (s5, c5) = q[4].sin_cos();
        let expected = nalgebra::Matrix3::new(-s5, 0.0, 0.0, 0.0, 1.0, 0.0, c5, 0.0, 1.0);
        assert!((j22 - expected).abs().max() < 1e-12);
    }
}

#[test]
fn residual_lookup_errors() {
    let model = shipped_model(RobotFamily::Iiwa);
    assert!(condition_residual(&model, "comau.A", &[0.0; 7]).is_err());
    assert!(condition_residual(&model, "iiwa.A", &[0.0; 6]).is_err());
    let r = condition_residual(&model, "iiwa.A", &[0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0]).unwrap();
    assert!((r - 0.09).abs() < 1e-15);
}
