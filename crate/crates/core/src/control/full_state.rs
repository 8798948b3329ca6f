use crate::quaternion::{kappa1, sat_pow_vec, UnitQuaternion, Vec3};

use super::{check_delta, check_positive, ControlError, LogicVar};

/// Gains of the full-state law. `alpha2 = 2α₁/(1 + α₁)` is derived.
///
/// `alpha1 = 1` is accepted and gives the asymptotic (non-finite-time) limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullStateGains {
    pub k1: f64,
    pub k2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta: f64,
}

impl FullStateGains {
    pub fn new(k1: f64, k2: f64, alpha1: f64, delta: f64) -> Result<Self, ControlError> {
        check_positive("k1", k1)?;
        check_positive("k2", k2)?;
        check_delta(delta)?;
        if !(alpha1 > 0.0 && alpha1 <= 1.0) {
            return Err(ControlError::InvalidGain {
                name: "alpha1",
                value: alpha1,
                constraint: "0 < alpha1 <= 1",
            });
        }
        Ok(Self {
            k1,
            k2,
            alpha1,
            alpha2: 2.0 * alpha1 / (1.0 + alpha1),
            delta,
        })
    }
}

/// u = u_d − k₁ κ₁(hQ_e, 1 − α₁) − k₂ sat_α₂(ω_e).
pub fn full_state_torque(
    q_e: &UnitQuaternion,
    omega_e: &Vec3,
    h: LogicVar,
    gains: &FullStateGains,
    u_d: &Vec3,
) -> Vec3 {
    u_d - kappa1(&q_e.signed(h.value()), 1.0 - gains.alpha1) * gains.k1 - sat_pow_vec(omega_e, gains.alpha2) * gains.k2
}

/// Full-state law evaluated with the estimated rate error ω̂_e = ω_m − b̂ − ω̄_d.
pub fn certainty_equivalence_torque(
    q_e: &UnitQuaternion,
    omega_e_hat: &Vec3,
    h: LogicVar,
    gains: &FullStateGains,
    u_d: &Vec3,
) -> Vec3 {
    full_state_torque(q_e, omega_e_hat, h, gains, u_d)
}
