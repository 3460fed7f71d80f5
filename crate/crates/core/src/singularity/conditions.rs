//! Registered singular configurations and their squared-distance residuals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, SingularityError};
use crate::model::{RobotFamily, RobotModel};

/// A joint (1-based) pinned to a singular value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTarget {
    pub joint: usize,
    pub value: f64,
}

/// Hand-derived implicit singularity equations `f(q) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImplicitFn {
    /// Comau wrist centre on the first axis:
    /// `a1 + a2 c2 + a3 c23 + d4 s23`.
    ComauWrist,
    /// Panda `f_sing,1(q4, q6)`.
    PandaSing1,
    /// Panda `f_sing,2(q3, q4, q5, q6)`, multiplied through by `cos²(q4)`.
    PandaSing2,
}

impl ImplicitFn {
    pub const ALL: [ImplicitFn; 3] = [
        ImplicitFn::ComauWrist,
        ImplicitFn::PandaSing1,
        ImplicitFn::PandaSing2,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ImplicitFn::ComauWrist => "comau.f_wrist",
            ImplicitFn::PandaSing1 => "panda.f_sing1",
            ImplicitFn::PandaSing2 => "panda.f_sing2",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.tag() == tag)
    }

    pub fn family(self) -> RobotFamily {
        match self {
            ImplicitFn::ComauWrist => RobotFamily::Comau,
            ImplicitFn::PandaSing1 | ImplicitFn::PandaSing2 => RobotFamily::Panda,
        }
    }

    /// Power of length carried by `f`.
    pub fn length_power(self) -> i32 {
        match self {
            ImplicitFn::ComauWrist => 1,
            ImplicitFn::PandaSing1 => 2,
            ImplicitFn::PandaSing2 => 3,
        }
    }

    /// Joints (1-based) the function reads.
    pub fn joints(self) -> &'static [usize] {
        match self {
            ImplicitFn::ComauWrist => &[2, 3],
            ImplicitFn::PandaSing1 => &[4, 6],
            ImplicitFn::PandaSing2 => &[3, 4, 5, 6],
        }
    }

    /// Evaluates `f` and, when `grad` is given, adds `scale * ∂f/∂q` into it.
    pub fn eval(self, model: &RobotModel, q: &[f64], grad: Option<(&mut [f64], f64)>) -> f64 {
        let th = |j: usize| q[j - 1] + model.joint_row(j).theta_offset;
        match self {
            ImplicitFn::ComauWrist => {
                let a1 = model.joint_row(1).a;
                let a2 = model.joint_row(2).a;
                let a3 = model.joint_row(3).a;
                let d4 = model.joint_row(4).d;
                let (t2, t3) = (th(2), th(3));
                let (s2, c2) = t2.sin_cos();
                let (s23, c23) = (t2 + t3).sin_cos();
                let f = a1 + a2 * c2 + a3 * c23 + d4 * s23;
                if let Some((g, k)) = grad {
                    let d23 = -a3 * s23 + d4 * c23;
                    g[1] += k * (-a2 * s2 + d23);
                    g[2] += k * d23;
                }
                f
            }
            ImplicitFn::PandaSing1 => {
                let (d3, d5, a5, a7) = panda_lengths(model);
                let (s4, c4) = th(4).sin_cos();
                let (s6, c6) = th(6).sin_cos();
                let p = a7 + (d3 + d5) * s6;
                let r = -a7 * d3 + (a5 * a5 - d5 * d3) * s6;
                let f = c4 * a5 * p + s4 * r;
                if let Some((g, k)) = grad {
                    g[3] += k * (-s4 * a5 * p + c4 * r);
                    g[5] += k * (c4 * a5 * (d3 + d5) * c6 + s4 * (a5 * a5 - d5 * d3) * c6);
                }
                f
            }
            ImplicitFn::PandaSing2 => {
                let (d3, d5, a5, a7) = panda_lengths(model);
                let (t3, t4, t5, t6) = (th(3), th(4), th(5), th(6));
                let (s3, c3) = t3.sin_cos();
                let (s4, c4) = t4.sin_cos();
                let (s5, c5) = t5.sin_cos();
                let (s6, c6) = t6.sin_cos();
                let (s35, c35) = (t3 + t5).sin_cos();
                let k1 = a5 * a5 - d5 * d3;
                let t = a5 + d3 * s4 - a5 * c4;
                let v = a5 + d5 * s4 - a5 * c4;
                let p = k1 * s4 + (d3 + d5) * a5 * c4;
                let qq = d3 * s4 - a5 * c4;
                let u = s6 * p - a7 * qq;
                let f = -a5 * a7 * c5 * c35 * t - c3 * u * v;
                if let Some((g, k)) = grad {
                    let dt = d3 * c4 + a5 * s4;
                    let dv = d5 * c4 + a5 * s4;
                    let dp = k1 * c4 - (d3 + d5) * a5 * s4;
                    let dq = d3 * c4 + a5 * s4;
                    let du = s6 * dp - a7 * dq;
                    g[2] += k * (a5 * a7 * c5 * s35 * t + s3 * u * v);
                    g[3] += k * (-a5 * a7 * c5 * c35 * dt - c3 * (du * v + u * dv));
                    g[4] += k * (a5 * a7 * (s5 * c35 + c5 * s35) * t);
                    g[5] += k * (-c3 * v * c6 * p);
                }
                f
            }
        }
    }
}

fn panda_lengths(model: &RobotModel) -> (f64, f64, f64, f64) {
    (
        model.joint_row(3).d,
        model.joint_row(5).d,
        model.joint_row(5).a,
        model.joint_row(7).a,
    )
}

/// Shape of a singular manifold.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionKind {
    SingleJoint(JointTarget),
    TwoJoint(JointTarget, JointTarget),
    Implicit(ImplicitFn),
    /// All members must hold simultaneously.
    Conjunction(Vec<ConditionKind>),
}

/// A named singular configuration registered for a robot.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityCondition {
    pub id: String,
    pub kind: ConditionKind,
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_angle(d: f64) -> f64 {
    let w = (d + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

impl ConditionKind {
    /// Dimensionless squared residual; zero exactly on the manifold. When
    /// `grad` is given, `scale * ∇residual` is accumulated into it.
    pub fn residual(
        &self,
        model: &RobotModel,
        q: &[f64],
        mut grad: Option<(&mut [f64], f64)>,
    ) -> f64 {
        match self {
            ConditionKind::SingleJoint(t) => joint_residual(t, q, grad),
            ConditionKind::TwoJoint(a, b) => {
                let ra = joint_residual(a, q, grad.as_mut().map(|(g, k)| (&mut **g, *k)));
                ra + joint_residual(b, q, grad)
            }
            ConditionKind::Implicit(f) => {
                let l = model.char_length.powi(f.length_power());
                let value = f.eval(model, q, None) / l;
                if let Some((g, k)) = grad {
                    f.eval(model, q, Some((g, k * 2.0 * value / l)));
                }
                value * value
            }
            ConditionKind::Conjunction(members) => members
                .iter()
                .map(|m| m.residual(model, q, grad.as_mut().map(|(g, k)| (&mut **g, *k))))
                .sum(),
        }
    }

    fn validate(&self, field: &str, dof: usize, family: Option<RobotFamily>) -> Result<(), ModelError> {
        let check_joint = |t: &JointTarget, f: &str| {
            if t.joint < 1 || t.joint > dof {
                return Err(ModelError::invalid(
                    f.to_string(),
                    format!("joint index {} outside [1, {dof}]", t.joint),
                ));
            }
            if !t.value.is_finite() {
                return Err(ModelError::invalid(f.to_string(), "value must be finite"));
            }
            Ok(())
        };
        match self {
            ConditionKind::SingleJoint(t) => check_joint(t, &format!("{field}.joint")),
            ConditionKind::TwoJoint(a, b) => {
                check_joint(a, &format!("{field}.joints"))?;
                check_joint(b, &format!("{field}.joints"))?;
                if a.joint == b.joint {
                    return Err(ModelError::invalid(
                        format!("{field}.joints"),
                        "the two joints must differ",
                    ));
                }
                Ok(())
            }
            ConditionKind::Implicit(f) => {
                if family != Some(f.family()) {
                    return Err(ModelError::invalid(
                        format!("{field}.fn"),
                        format!("`{}` is not registered for this robot", f.tag()),
                    ));
                }
                Ok(())
            }
            ConditionKind::Conjunction(members) => {
                if members.is_empty() {
                    return Err(ModelError::invalid(
                        format!("{field}.members"),
                        "conjunction needs at least one member",
                    ));
                }
                for (i, m) in members.iter().enumerate() {
                    m.validate(&format!("{field}.members[{i}]"), dof, family)?;
                }
                Ok(())
            }
        }
    }
}

fn joint_residual(t: &JointTarget, q: &[f64], grad: Option<(&mut [f64], f64)>) -> f64 {
    let d = wrap_angle(q[t.joint - 1] - t.value);
    if let Some((g, k)) = grad {
        g[t.joint - 1] += k * 2.0 * d;
    }
    d * d
}

impl SingularityCondition {
    pub(crate) fn from_raw(
        raw: &RawCondition,
        field: &str,
        dof: usize,
        family: Option<RobotFamily>,
    ) -> Result<Self, ModelError> {
        let id = raw
            .id
            .clone()
            .ok_or_else(|| ModelError::invalid(format!("{field}.id"), "missing condition id"))?;
        let kind = raw.to_kind(field)?;
        kind.validate(field, dof, family)?;
        Ok(SingularityCondition { id, kind })
    }

    /// The unexpanded family of a branch condition, e.g. `iiwa.B` for
    /// `iiwa.B.2`.
    pub fn family_id(&self) -> &str {
        match self.id.match_indices('.').nth(1) {
            Some((i, _)) => &self.id[..i],
            None => &self.id,
        }
    }
}

/// Residual of one registered condition, by id.
pub fn condition_residual(
    model: &RobotModel,
    id: &str,
    q: &[f64],
) -> Result<f64, SingularityError> {
    crate::kinematics::check_joints(model, q)?;
    let cond = model
        .condition(id)
        .ok_or_else(|| SingularityError::UnknownCondition(id.to_string()))?;
    Ok(cond.kind.residual(model, q, None))
}

/// On-disk form of a condition descriptor.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawCondition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<[f64; 2]>,
    #[serde(default, rename = "fn", skip_serializing_if = "Option::is_none")]
    pub func: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<RawCondition>>,
}

impl RawCondition {
    fn to_kind(&self, field: &str) -> Result<ConditionKind, ModelError> {
        let missing = |key: &str| ModelError::invalid(format!("{field}.{key}"), "missing");
        match self.kind.as_str() {
            "single" => Ok(ConditionKind::SingleJoint(JointTarget {
                joint: self.joint.ok_or_else(|| missing("joint"))?,
                value: self.value.ok_or_else(|| missing("value"))?,
            })),
            "two" => {
                let j = self.joints.ok_or_else(|| missing("joints"))?;
                let v = self.values.ok_or_else(|| missing("values"))?;
                Ok(ConditionKind::TwoJoint(
                    JointTarget { joint: j[0], value: v[0] },
                    JointTarget { joint: j[1], value: v[1] },
                ))
            }
            "implicit" => {
                let tag = self.func.as_deref().ok_or_else(|| missing("fn"))?;
                let f = ImplicitFn::from_tag(tag).ok_or_else(|| {
                    ModelError::invalid(format!("{field}.fn"), format!("unknown function `{tag}`"))
                })?;
                Ok(ConditionKind::Implicit(f))
            }
            "conj" => {
                let members = self.members.as_ref().ok_or_else(|| missing("members"))?;
                members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.to_kind(&format!("{field}.members[{i}]")))
                    .collect::<Result<Vec<_>, _>>()
                    .map(ConditionKind::Conjunction)
            }
            other => Err(ModelError::invalid(
                format!("{field}.kind"),
                format!("unknown condition kind `{other}`"),
            )),
        }
    }

    fn from_kind(kind: &ConditionKind) -> Self {
        match kind {
            ConditionKind::SingleJoint(t) => RawCondition {
                kind: "single".into(),
                joint: Some(t.joint),
                value: Some(t.value),
                ..Default::default()
            },
            ConditionKind::TwoJoint(a, b) => RawCondition {
                kind: "two".into(),
                joints: Some([a.joint, b.joint]),
                values: Some([a.value, b.value]),
                ..Default::default()
            },
            ConditionKind::Implicit(f) => RawCondition {
                kind: "implicit".into(),
                func: Some(f.tag().into()),
                ..Default::default()
            },
            ConditionKind::Conjunction(members) => RawCondition {
                kind: "conj".into(),
                members: Some(members.iter().map(RawCondition::from_kind).collect()),
                ..Default::default()
            },
        }
    }
}

impl From<&SingularityCondition> for RawCondition {
    fn from(c: &SingularityCondition) -> Self {
        RawCondition {
            id: Some(c.id.clone()),
            ..RawCondition::from_kind(&c.kind)
        }
    }
}
