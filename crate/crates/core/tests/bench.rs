use singplan::bench::{records_to_csv, run_benchmark, sample_endpoints, sample_rng, BenchmarkConfig, RECORDS_CSV_HEADER};
use singplan::*;

fn config(extra: &str) -> BenchmarkConfig {
    BenchmarkConfig::from_json(&format!(r#"{{"robot":"comau","n_mc":4,"seed":5,"N":10{extra}}}"#)).unwrap()
}

#[test]
fn modes_solve_identical_samples() {
    let run = run_benchmark(&config(""), None).unwrap();
    assert_eq!(run.records.len(), 12);
    for chunk in run.records.chunks(3) {
        assert!(chunk.iter().all(|r| r.sample_id == chunk[0].sample_id));
        assert!(chunk.iter().all(|r| r.sample_hash == chunk[0].sample_hash));
        let modes: Vec<_> = chunk.iter().map(|r| r.mode).collect();
        assert_eq!(modes, ObjectiveMode::ALL);
    }
    let hashes: Vec<u64> = run.summary.modes.iter().map(|m| m.sample_hash).collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(run.summary.modes.len(), 3);
}

#[test]
fn endpoints_respect_exclusion_and_limits() {
    let model = shipped_model(RobotFamily::Panda);
    for id in 0..50 {
        let (xs, xt) = sample_endpoints(&model, 1e-4, &mut sample_rng(2, id)).unwrap();
        for x in [&xs, &xt] {
            let q = &x[..7];
            assert!(manipulability(&model, q).unwrap() >= 1e-4);
            assert!(model.within_limits(q));
            assert!(x[7..].iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn result_does_not_depend_on_worker_count() {
    let one = run_benchmark(&config(r#","jobs":1,"modes":["none"]"#), None).unwrap();
    let two = run_benchmark(&config(r#","jobs":2,"modes":["none"]"#), None).unwrap();
    let strip = |rs: &[BenchmarkRecord]| -> Vec<BenchmarkRecord> {
        rs.iter().cloned().map(|mut r| {
            r.wall_time = 0.0;
            r
        }).collect()
    };
    assert_eq!(strip(&one.records), strip(&two.records));
}

#[test]
fn unconverged_records_carry_no_metrics() {
    let cfg = config(r#","max_outer":1,"max_inner":2,"modes":["potential_functions"]"#);
    let run = run_benchmark(&cfg, None).unwrap();
    for r in &run.records {
        assert_eq!(r.status, SolveStatus::MaxIter);
        assert!(r.t_f.is_none() && r.m_avg.is_none() && r.l_p.is_none() && r.m_traj_min.is_none());
    }
    let s = &run.summary.modes[0];
    assert_eq!(s.converged, 0);
    assert_eq!(s.convergence_rate, 0.0);
    assert!(s.t_f.mean.is_nan());
    let csv = records_to_csv(&run.records);
    assert_eq!(csv.lines().next().unwrap(), RECORDS_CSV_HEADER);
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn converged_metrics_are_consistent() {
    let run = run_benchmark(&config(r#","modes":["none"]"#), None).unwrap();
    for r in &run.records {
        assert_eq!(r.status, SolveStatus::Converged);
        let (lo, hi, avg) = (r.m_traj_min.unwrap(), r.m_traj_max.unwrap(), r.m_avg.unwrap());
        assert!(lo <= avg && avg <= hi);
        assert!(lo >= 0.0);
        assert!(r.l_p.unwrap() > 0.0 && r.l_quat.unwrap() >= 0.0);
        assert!(r.constraint_violation <= 1e-6);
    }
    let s = &run.summary.modes[0];
    let min = run.records.iter().map(|r| r.m_traj_min.unwrap()).fold(f64::INFINITY, f64::min);
    assert_eq!(s.m_min, min);
}

#[test]
fn rejection_budget_surfaces_as_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = shipped_model(RobotFamily::Iiwa);
    model.q_min[3] = -1e-12;
    model.q_max[3] = 1e-12;
    let path = dir.path().join("flat_elbow.json");
    std::fs::write(&path, model.to_json()).unwrap();
    let cfg = BenchmarkConfig::from_json(&format!(r#"{{"robot":{:?},"n_mc":1}}"#, path.to_str().unwrap())).unwrap();
    assert!(matches!(run_benchmark(&cfg, None), Err(BenchError::RejectionBudget(_))));
}
