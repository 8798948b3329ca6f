use crate::quaternion::{kappa1, quat_mul, Quaternion, UnitQuaternion, Vec3};

use super::{check_delta, check_positive, in_jump_set, sgn_bar, ControlError, LogicVar};

/// Gains of the attitude-only law. `alpha1 = 2α₃ − 1` is derived.
///
/// `alpha3 = 1` is accepted and gives the asymptotic limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputFeedbackGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub alpha3: f64,
    pub alpha1: f64,
    pub delta: f64,
}

impl OutputFeedbackGains {
    pub fn new(k1: f64, k2: f64, k3: f64, alpha3: f64, delta: f64) -> Result<Self, ControlError> {
        check_positive("k1", k1)?;
        check_positive("k2", k2)?;
        check_positive("k3", k3)?;
        check_delta(delta)?;
        if !(alpha3 > 0.5 && alpha3 <= 1.0) {
            return Err(ControlError::InvalidGain {
                name: "alpha3",
                value: alpha3,
                constraint: "0.5 < alpha3 <= 1",
            });
        }
        Ok(Self {
            k1,
            k2,
            k3,
            alpha3,
            alpha1: 2.0 * alpha3 - 1.0,
            delta,
        })
    }
}

/// Filter frame attitude Q_ED (w.r.t. the desired frame) and its logic
/// variable h̃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub q_ed: UnitQuaternion,
    pub h_tilde: LogicVar,
}

impl FilterState {
    /// Q̃ = Q_ED* ⊗ Q_e.
    pub fn attitude_error(&self, q_e: &UnitQuaternion) -> UnitQuaternion {
        self.q_ed.conjugate().mul(q_e)
    }
}

/// Q̇_ED = ½ Q_ED ⊗ [k₃ Rᵀ(Q̃) κ₁(h̃Q̃, 1 − α₃)].
pub fn filter_flow_rate(filter: &FilterState, q_e_meas: &UnitQuaternion, k3: f64, alpha3: f64) -> Quaternion {
    filter_flow_rate_raw(filter.q_ed.as_quaternion(), filter.h_tilde, q_e_meas, k3, alpha3)
}

pub(crate) fn filter_flow_rate_raw(
    q_ed: &Quaternion,
    h_tilde: LogicVar,
    q_e_meas: &UnitQuaternion,
    k3: f64,
    alpha3: f64,
) -> Quaternion {
    let q_tilde = UnitQuaternion::new_unchecked(quat_mul(&q_ed.conjugate(), q_e_meas.as_quaternion()));
    let k = kappa1(&q_tilde.signed(h_tilde.value()), 1.0 - alpha3) * k3;
    let input = q_tilde.rotation_matrix().transpose() * k;
    quat_mul(q_ed, &Quaternion::pure(input)) * 0.5
}

/// u = u_d − k₁ κ₁(hQ_e, 1 − α₁) − k₂ κ₁(h̃Q̃, 1 − α₁). No rate feedback.
pub fn output_feedback_torque(
    q_e: &UnitQuaternion,
    q_tilde: &UnitQuaternion,
    h: LogicVar,
    h_tilde: LogicVar,
    gains: &OutputFeedbackGains,
    u_d: &Vec3,
) -> Vec3 {
    let a = 1.0 - gains.alpha1;
    u_d - kappa1(&q_e.signed(h.value()), a) * gains.k1 - kappa1(&q_tilde.signed(h_tilde.value()), a) * gains.k2
}

/// Joint jump of the attitude-only closed loop: both logic variables reset
/// to the signs of their scalar parts. Rejected outside the jump set.
pub fn joint_jump_g3(
    q_tilde: &UnitQuaternion,
    q_e: &UnitQuaternion,
    h: LogicVar,
    h_tilde: LogicVar,
    delta: f64,
) -> Result<(LogicVar, LogicVar), ControlError> {
    let in_d = in_jump_set(h, q_e.q0(), delta) || in_jump_set(h_tilde, q_tilde.q0(), delta);
    if !in_d {
        return Err(ControlError::NotInJumpSet {
            product: (h.value() * q_e.q0()).min(h_tilde.value() * q_tilde.q0()),
            delta,
        });
    }
    Ok((sgn_bar(q_e.q0()), sgn_bar(q_tilde.q0())))
}
