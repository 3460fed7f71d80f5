//! Closed-form `m²(q)` for the Comau-class and iiwa-class arms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::SingularityError;
use crate::kinematics::check_joints;
use crate::model::{RobotFamily, RobotModel};

/// `|cos(θ3)|` below this is treated as the pole of `tan(θ3)`.
pub const TANGENT_POLE_TOLERANCE: f64 = 1e-12;

/// Evaluates the closed-form squared singularity index. Link lengths are
/// read from the model, so edited model files stay consistent.
pub fn symbolic_manipulability_sq(model: &RobotModel, q: &[f64]) -> Result<f64, SingularityError> {
    check_joints(model, q)?;
    let theta = |j: usize| q[j - 1] + model.joint_row(j).theta_offset;
    match model.family() {
        Some(RobotFamily::Comau) if model.dof == 6 => {
            let lengths = ComauLengths {
                a1: model.joint_row(1).a,
                a2: model.joint_row(2).a,
                a3: model.joint_row(3).a,
                d4: model.joint_row(4).d,
            };
            comau_m_sq(&lengths, theta(2), theta(3), theta(5))
        }
        Some(RobotFamily::Iiwa) if model.dof == 7 => {
            let d_se = model.joint_row(2).d + model.joint_row(3).d;
            let d_ew = model.joint_row(4).d + model.joint_row(5).d;
            let t: Vec<f64> = (1..=7).map(theta).collect();
            Ok(iiwa_m_sq(d_se, d_ew, &t))
        }
        Some(RobotFamily::Panda) => Err(SingularityError::PandaUnsupported),
        _ => Err(SingularityError::UnsupportedModel(model.name.clone())),
    }
}

/// Outcome of comparing the closed form with the numeric `det(JJᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolicCheck {
    pub samples: usize,
    pub max_relative_error: f64,
    /// Configuration index of the worst sample.
    pub worst_sample: usize,
}

/// Relative error `|m²_closed − m²_numeric| / m²_numeric` maximized over
/// `samples` uniform draws from the joint box. Draws on the tangent pole
/// are redrawn.
pub fn verify_symbolic(model: &RobotModel, samples: usize, seed: u64) -> Result<SymbolicCheck, SingularityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = SymbolicCheck { samples, max_relative_error: 0.0, worst_sample: 0 };
    let mut i = 0;
    while i < samples {
        let q: Vec<f64> = (0..model.dof)
            .map(|j| rng.random_range(model.q_min[j]..model.q_max[j]))
            .collect();
        let sym = match symbolic_manipulability_sq(model, &q) {
            Err(SingularityError::TangentPole) => continue,
            r => r?,
        };
        let m = super::manipulability(model, &q)?;
        let num = m * m;
        let rel = (sym - num).abs() / num;
        if !(rel <= check.max_relative_error) {
            check.max_relative_error = rel;
            check.worst_sample = i;
        }
        i += 1;
    }
    Ok(check)
}

#[derive(Debug, Clone, Copy)]
pub struct ComauLengths {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub d4: f64,
}

/// Comau `m²` written in `x = tan(θ3)`, `y = x² + 1`. The factor `1/cos(θ3)`
/// hidden in the cross term is `sgn(cos θ3)·√y`.
///
/// The bracket vanishes on the elbow manifold while its terms stay of order
/// one, so it is summed in double-double arithmetic from `(s2, c2)`
/// renormalized to the unit circle. Plain `f64` loses about `1e-16/m²` of
/// relative accuracy there.
pub fn comau_m_sq(l: &ComauLengths, t2: f64, t3: f64, t5: f64) -> Result<f64, SingularityError> {
    let c3 = t3.cos();
    if c3.abs() < TANGENT_POLE_TOLERANCE {
        return Err(SingularityError::TangentPole);
    }
    let ComauLengths { a1, a2, a3, d4 } = *l;
    let (s2, c2) = t2.sin_cos();
    let norm = (Dd::from(s2) * s2 + Dd::from(c2) * c2).sqrt();
    let (s2, c2) = (Dd::from(s2) / norm, Dd::from(c2) / norm);
    let s5 = t5.sin();
    let x = Dd::from(t3.tan());
    let y = x * x + 1.0;
    let sigma = c3.signum();
    let (a1, a2, a3, d4) = (Dd::from(a1), Dd::from(a2), Dd::from(a3), Dd::from(d4));
    let bracket = (a1 + a2 * c2) * ((x * d4 + a3) * c2 + (d4 - a3 * x) * s2) * y.sqrt() * (2.0 * sigma)
        + ((a2 * a2 - a3 * a3 + d4 * d4) * x * x + a3 * d4 * x * 4.0 + a2 * a2 + a3 * a3 - d4 * d4) * c2 * c2
        + ((x * d4 + a3) * (a3 * x - d4) * s2 * (-2.0) + a1 * a2 * y * 2.0) * c2
        + (a1 * a1 + a3 * a3) * x * x
        - a3 * d4 * x * 2.0
        + a1 * a1
        + d4 * d4;
    let lead = (a2 * (a3 * x - d4)).hi * s5;
    Ok(lead * lead * (bracket / (y * y)).hi)
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn fast(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd { hi: s, lo: lo - (s - hi) }
    }

    fn sqrt(self) -> Dd {
        let r = self.hi.sqrt();
        // one Newton step on r² = self
        let rr = Dd::from(r) * r;
        let corr = (self - rr).hi / (2.0 * r);
        Dd::fast(r, corr)
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let u = Dd::fast(s.hi, s.lo + t.hi);
        Dd::fast(u.hi, u.lo + t.lo)
    }
}

impl std::ops::Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::fast(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * q1;
        let q2 = r.hi / o.hi;
        Dd::fast(q1, q2)
    }
}

impl std::ops::Add<f64> for Dd {
    type Output = Dd;
    fn add(self, o: f64) -> Dd {
        self + Dd::from(o)
    }
}

impl std::ops::Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, o: f64) -> Dd {
        self * Dd::from(o)
    }
}

/// iiwa `m²` with shoulder–elbow length `d_se` and elbow–wrist length `d_ew`;
/// `t` holds the seven joint angles.
pub fn iiwa_m_sq(d_se: f64, d_ew: f64, t: &[f64]) -> f64 {
    let (s2, c2) = t[1].sin_cos();
    let c3 = t[2].cos();
    let (s4, c4) = t[3].sin_cos();
    let c5 = t[4].cos();
    let (s6, c6) = t[5].sin_cos();
    let s22 = (2.0 * t[1]).sin();
    let s26 = (2.0 * t[5]).sin();
    let (se2, ew2) = (d_se * d_se, d_ew * d_ew);
    let bracket = se2 * s2 * s2 * s4 * s4 * c5 * c5 * c6 * c6
        + ew2 * c2 * c2 * c3 * c3 * s4 * s4 * s6 * s6
        + (se2 + 2.0 * d_se * d_ew * c4 + ew2) * s2 * s2 * s6 * s6
        - 0.5 * (se2 * c4 + d_se * d_ew) * s2 * s2 * s4 * c5 * s26
        - 0.5 * (ew2 * c4 + d_se * d_ew) * s22 * c3 * s4 * s6 * s6;
    2.0 * se2 * ew2 * s4 * s4 * bracket
}
