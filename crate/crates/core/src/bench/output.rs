use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{BenchmarkRecord, BenchmarkRun};
use crate::error::BenchError;

pub const RECORDS_CSV_HEADER: &str = "sample_id,mode,status,t_f,wall_time,m_traj_min,m_traj_max,m_avg,l_p,l_quat,iterations,constraint_violation";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

/// One line per record; metrics of unconverged records are left empty.
pub fn records_to_csv(records: &[BenchmarkRecord]) -> String {
    let mut out = String::from(RECORDS_CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.sample_id,
            r.mode.name(),
            r.status.name(),
            opt(r.t_f),
            r.wall_time,
            opt(r.m_traj_min),
            opt(r.m_traj_max),
            opt(r.m_avg),
            opt(r.l_p),
            opt(r.l_quat),
            r.iterations,
            r.constraint_violation
        )
        .unwrap();
    }
    out
}

/// Writes `records.csv` and `summary.json` into `dir` and returns both paths.
pub fn write_outputs(dir: impl AsRef<Path>, run: &BenchmarkRun) -> Result<(PathBuf, PathBuf), BenchError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let csv = dir.join("records.csv");
    let json = dir.join("summary.json");
    std::fs::write(&csv, records_to_csv(&run.records))?;
    std::fs::write(&json, serde_json::to_string_pretty(&run.summary)?)?;
    Ok((csv, json))
}
