//! Robot descriptions: DH rows, joint limits and the registered singular
//! configurations, plus the JSON model-file format.
//!
//! A model file is a single JSON document:
//!
//! ```json
//! {
//!   "name": "iiwa",
//!   "dof": 7,
//!   "convention": "standard",
//!   "rows": [{"theta_offset": 0.0, "d": 0.34, "a": 0.0, "alpha": 1.5707963267948966, "joint": 1}, ...],
//!   "q_min": [...], "q_max": [...], "dq_max": [...],
//!   "char_length": 1.266,
//!   "singularities": [{"id": "iiwa.A", "kind": "single", "joint": 4, "value": 0.0}, ...]
//! }
//! ```
//!
//! Angles are radians and lengths meters. `convention` and `char_length` are
//! optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::singularity::conditions::{RawCondition, SingularityCondition};

/// Which DH product a model's rows use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DhConvention {
    /// `Rz(θ) Tz(d) Tx(a) Rx(α)` per row; joint i rotates about z_{i-1}.
    #[default]
    Standard,
    /// Craig's form `Rx(α) Tx(a) Rz(θ) Tz(d)`; joint i rotates about z_i.
    Modified,
}

/// One row of a DH table. `joint` is 1-based; fixed rows (such as a flange
/// offset) have no joint and contribute a constant transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhRow {
    #[serde(default)]
    pub theta_offset: f64,
    pub d: f64,
    pub a: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<usize>,
}

/// Kinematic families with hand-derived singularity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RobotFamily {
    Comau,
    Iiwa,
    Panda,
}

impl RobotFamily {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "comau" => Some(RobotFamily::Comau),
            "iiwa" => Some(RobotFamily::Iiwa),
            "panda" => Some(RobotFamily::Panda),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RobotFamily::Comau => "comau",
            RobotFamily::Iiwa => "iiwa",
            RobotFamily::Panda => "panda",
        }
    }
}

/// A validated, immutable robot description.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub dof: usize,
    pub convention: DhConvention,
    pub rows: Vec<DhRow>,
    pub q_min: Vec<f64>,
    pub q_max: Vec<f64>,
    pub dq_max: Vec<f64>,
    /// Length used to make implicit singularity residuals dimensionless.
    pub char_length: f64,
    pub singularity_conditions: Vec<SingularityCondition>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    dof: usize,
    #[serde(default)]
    convention: DhConvention,
    rows: Vec<DhRow>,
    q_min: Vec<f64>,
    q_max: Vec<f64>,
    dq_max: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    char_length: Option<f64>,
    #[serde(default)]
    singularities: Vec<RawCondition>,
}

const COMAU_JSON: &str = include_str!("../models/comau.json");
const IIWA_JSON: &str = include_str!("../models/iiwa.json");
const PANDA_JSON: &str = include_str!("../models/panda.json");

impl RobotModel {
    /// Parses and validates a model from JSON text.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: RawModel = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }

    pub fn to_json(&self) -> String {
        let raw = RawModel {
            name: self.name.clone(),
            dof: self.dof,
            convention: self.convention,
            rows: self.rows.clone(),
            q_min: self.q_min.clone(),
            q_max: self.q_max.clone(),
            dq_max: self.dq_max.clone(),
            char_length: Some(self.char_length),
            singularities: self
                .singularity_conditions
                .iter()
                .map(RawCondition::from)
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("model serialization is infallible")
    }

    fn from_raw(raw: RawModel) -> Result<Self, ModelError> {
        let m = raw.dof;
        if m == 0 {
            return Err(ModelError::invalid("dof", "must be at least 1"));
        }
        if raw.name.trim().is_empty() {
            return Err(ModelError::invalid("name", "must not be empty"));
        }

        let mut next_joint = 1;
        for (i, row) in raw.rows.iter().enumerate() {
            let field = format!("rows[{i}]");
            for (key, v) in [
                ("theta_offset", row.theta_offset),
                ("d", row.d),
                ("a", row.a),
                ("alpha", row.alpha),
            ] {
                if !v.is_finite() {
                    return Err(ModelError::invalid(
                        format!("{field}.{key}"),
                        "must be finite",
                    ));
                }
            }
            if let Some(j) = row.joint {
                if j < 1 || j > m {
                    return Err(ModelError::invalid(
                        format!("{field}.joint"),
                        format!("joint index {j} outside [1, {m}]"),
                    ));
                }
                if j != next_joint {
                    let msg = if j < next_joint {
                        format!("joint {j} appears more than once")
                    } else {
                        format!("expected joint {next_joint} next along the chain, found {j}")
                    };
                    return Err(ModelError::invalid(format!("{field}.joint"), msg));
                }
                next_joint += 1;
            }
        }
        if next_joint != m + 1 {
            return Err(ModelError::invalid(
                "rows",
                format!("joint {next_joint} has no DH row"),
            ));
        }

        for (key, v) in [("q_min", &raw.q_min), ("q_max", &raw.q_max), ("dq_max", &raw.dq_max)] {
            if v.len() != m {
                return Err(ModelError::invalid(
                    key,
                    format!("expected {m} entries, got {}", v.len()),
                ));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(ModelError::invalid(
                    key,
                    format!("joint {} is not finite", i + 1),
                ));
            }
        }
        for j in 0..m {
            if raw.q_min[j] >= raw.q_max[j] {
                return Err(ModelError::invalid(
                    "q_min",
                    format!(
                        "joint {}: q_min {} is not below q_max {}",
                        j + 1,
                        raw.q_min[j],
                        raw.q_max[j]
                    ),
                ));
            }
            if raw.dq_max[j] <= 0.0 {
                return Err(ModelError::invalid(
                    "dq_max",
                    format!("joint {}: must be positive", j + 1),
                ));
            }
        }

        let char_length = match raw.char_length {
            Some(l) if l.is_finite() && l > 0.0 => l,
            Some(l) => {
                return Err(ModelError::invalid(
                    "char_length",
                    format!("must be positive, got {l}"),
                ))
            }
            None => default_char_length(&raw.rows),
        };
        if !(char_length > 0.0) {
            return Err(ModelError::invalid(
                "char_length",
                "rows have no nonzero lengths; set char_length explicitly",
            ));
        }

        let family = RobotFamily::from_name(&raw.name);
        let mut conditions = Vec::with_capacity(raw.singularities.len());
        for (i, rc) in raw.singularities.iter().enumerate() {
            let field = format!("singularities[{i}]");
            let cond = SingularityCondition::from_raw(rc, &field, m, family)?;
            if conditions
                .iter()
                .any(|c: &SingularityCondition| c.id == cond.id)
            {
                return Err(ModelError::invalid(
                    format!("{field}.id"),
                    format!("duplicate condition id `{}`", cond.id),
                ));
            }
            conditions.push(cond);
        }

        Ok(RobotModel {
            name: raw.name,
            dof: m,
            convention: raw.convention,
            rows: raw.rows,
            q_min: raw.q_min,
            q_max: raw.q_max,
            dq_max: raw.dq_max,
            char_length,
            singularity_conditions: conditions,
        })
    }

    pub fn family(&self) -> Option<RobotFamily> {
        RobotFamily::from_name(&self.name)
    }

    /// The DH row driven by joint `joint` (1-based).
    pub fn joint_row(&self, joint: usize) -> &DhRow {
        self.rows
            .iter()
            .find(|r| r.joint == Some(joint))
            .expect("validated model has a row for every joint")
    }

    pub fn condition(&self, id: &str) -> Option<&SingularityCondition> {
        self.singularity_conditions.iter().find(|c| c.id == id)
    }

    /// True when every joint value lies inside its limits.
    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof
            && q
                .iter()
                .zip(self.q_min.iter().zip(&self.q_max))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

fn default_char_length(rows: &[DhRow]) -> f64 {
    rows.iter().map(|r| r.a.abs() + r.d.abs()).sum()
}

/// Reads and validates a model file.
pub fn load_robot_model(path: impl AsRef<Path>) -> Result<RobotModel, ModelError> {
    let text = std::fs::read_to_string(path)?;
    RobotModel::from_json(&text)
}

/// The three bundled robots: Comau-class 6-DoF, iiwa-class 7-DoF without
/// offsets, Panda-class 7-DoF with offsets.
pub fn shipped_models() -> Vec<RobotModel> {
    [COMAU_JSON, IIWA_JSON, PANDA_JSON]
        .iter()
        .map(|text| RobotModel::from_json(text).expect("bundled model files are valid"))
        .collect()
}

pub fn shipped_model(family: RobotFamily) -> RobotModel {
    let text = match family {
        RobotFamily::Comau => COMAU_JSON,
        RobotFamily::Iiwa => IIWA_JSON,
        RobotFamily::Panda => PANDA_JSON,
    };
    RobotModel::from_json(text).expect("bundled model files are valid")
}

/// Resolves either a bundled robot name or a path to a model file.
pub fn resolve_robot(name_or_path: &str) -> Result<RobotModel, ModelError> {
    if let Some(family) = RobotFamily::from_name(name_or_path) {
        return Ok(shipped_model(family));
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_robot_model(path);
    }
    Err(ModelError::UnknownRobot(name_or_path.to_string()))
}
