use crate::quaternion::{kappa1, quat_mul, Quaternion, UnitQuaternion, Vec3};

use super::{check_delta, check_positive, in_jump_set, sgn_bar, ControlError, LogicVar};

/// Gains of the hybrid bias observer. `beta2 = 2β₁ − 1` is derived.
///
/// `beta1 = 1` is accepted and gives the exponential (non-finite-time) limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    pub mu1: f64,
    pub mu2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
}

impl ObserverGains {
    pub fn new(mu1: f64, mu2: f64, beta1: f64, delta: f64) -> Result<Self, ControlError> {
        check_positive("mu1", mu1)?;
        check_positive("mu2", mu2)?;
        check_delta(delta)?;
        if !(beta1 > 0.5 && beta1 <= 1.0) {
            return Err(ControlError::InvalidGain {
                name: "beta1",
                value: beta1,
                constraint: "0.5 < beta1 <= 1",
            });
        }
        Ok(Self {
            mu1,
            mu2,
            beta1,
            beta2: 2.0 * beta1 - 1.0,
            delta,
        })
    }
}

/// Estimate frame attitude Q_EI (w.r.t. inertial), bias estimate b̂ (rad/s)
/// and the observer logic variable h̃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub q_ei: UnitQuaternion,
    pub b_hat: Vec3,
    pub h_tilde: LogicVar,
}

impl ObserverState {
    /// Q̃ = Q_EI* ⊗ Q for a (measured) body attitude Q.
    pub fn attitude_error(&self, q: &UnitQuaternion) -> UnitQuaternion {
        self.q_ei.conjugate().mul(q)
    }

    pub fn in_jump_set(&self, q_meas: &UnitQuaternion, delta: f64) -> bool {
        in_jump_set(self.h_tilde, self.attitude_error(q_meas).q0(), delta)
    }
}

/// Flow of the observer: returns (Q̇_EI, ḃ̂) with
/// Q̇_EI = ½ Q_EI ⊗ [Rᵀ(Q̃)(ω_m − b̂ + μ₁ κ₁(h̃Q̃, 1 − β₁))],
/// ḃ̂ = −μ₂ κ₁(h̃Q̃, 1 − β₂).
pub fn observer_flow_rate(
    obs: &ObserverState,
    q_meas: &UnitQuaternion,
    omega_m: &Vec3,
    gains: &ObserverGains,
) -> (Quaternion, Vec3) {
    observer_flow_rate_raw(
        obs.q_ei.as_quaternion(),
        &obs.b_hat,
        obs.h_tilde,
        q_meas,
        omega_m,
        gains,
    )
}

/// [`observer_flow_rate`] on an integrator-stage quaternion that may sit
/// slightly off 𝕊³.
pub(crate) fn observer_flow_rate_raw(
    q_ei: &Quaternion,
    b_hat: &Vec3,
    h_tilde: LogicVar,
    q_meas: &UnitQuaternion,
    omega_m: &Vec3,
    gains: &ObserverGains,
) -> (Quaternion, Vec3) {
    let q_tilde = UnitQuaternion::new_unchecked(quat_mul(&q_ei.conjugate(), q_meas.as_quaternion()));
    let signed = q_tilde.signed(h_tilde.value());
    let inner = omega_m - b_hat + kappa1(&signed, 1.0 - gains.beta1) * gains.mu1;
    let input = q_tilde.rotation_matrix().transpose() * inner;
    let q_dot = quat_mul(q_ei, &Quaternion::pure(input)) * 0.5;
    let b_dot = -kappa1(&signed, 1.0 - gains.beta2) * gains.mu2;
    (q_dot, b_dot)
}

/// Jump of the observer: only h̃ changes, to sgn̄(q̃0). Rejected outside the
/// jump set.
pub fn observer_jump(obs: &ObserverState, q_meas: &UnitQuaternion, delta: f64) -> Result<ObserverState, ControlError> {
    let q0 = obs.attitude_error(q_meas).q0();
    if !in_jump_set(obs.h_tilde, q0, delta) {
        return Err(ControlError::NotInJumpSet {
            product: obs.h_tilde.value() * q0,
            delta,
        });
    }
    Ok(ObserverState {
        h_tilde: sgn_bar(q0),
        ..*obs
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quaternion::normalize;
    use crate::rigid_body::kinematics_rate;

    fn gains() -> ObserverGains {
        ObserverGains::new(0.33, 0.12, 0.75, 0.3).unwrap()
    }

    #[test]
    fn coupling_and_validation() {
        assert_eq!(gains().beta2, 0.5);
        assert!(ObserverGains::new(0.33, 0.12, 0.5, 0.3).is_err());
        assert!(ObserverGains::new(0.33, -1.0, 0.75, 0.3).is_err());
        assert!(ObserverGains::new(0.33, 0.12, 1.0, 0.3).is_ok());
    }

    #[test]
    fn converged_observer_tracks_truth() {
        let q = normalize(&Quaternion::new(0.3, 0.6, -0.7, 0.2)).unwrap();
        let w = Vec3::new(0.1, -0.3, 0.05);
        let b = Vec3::new(0.01, -0.05, 0.02);
        let obs = ObserverState {
            q_ei: q,
            b_hat: b,
            h_tilde: LogicVar::POS,
        };
        let (qd, bd) = observer_flow_rate(&obs, &q, &(w + b), &gains());
        assert!(qd.max_abs_diff(&kinematics_rate(&q, &w)) < 1e-15);
        assert_eq!(bd, Vec3::zeros());
    }

    #[test]
    fn jump_examples() {
        // Q_EI = 1 so q̃0 equals the measured scalar part.
        let obs = ObserverState {
            q_ei: UnitQuaternion::identity(),
            b_hat: Vec3::new(0.3, 0.2, 0.1),
            h_tilde: LogicVar::POS,
        };
        let q_meas = UnitQuaternion::new(Quaternion::new(-0.4, 0.0, 0.0, 0.84f64.sqrt())).unwrap();
        let after = observer_jump(&obs, &q_meas, 0.3).unwrap();
        assert_eq!(after.h_tilde, LogicVar::NEG);
        assert_eq!(after.b_hat, obs.b_hat);
        assert_eq!(after.q_ei, obs.q_ei);

        let q_meas = UnitQuaternion::new(Quaternion::new(-0.2, 0.0, 0.0, 0.96f64.sqrt())).unwrap();
        assert!(matches!(
            observer_jump(&obs, &q_meas, 0.3),
            Err(ControlError::NotInJumpSet { .. })
        ));
    }

    #[test]
    fn rate_preserves_norm() {
        let q = normalize(&Quaternion::new(0.3, 0.6, -0.7, 0.2)).unwrap();
        let obs = ObserverState {
            q_ei: normalize(&Quaternion::new(0.5, 0.1, -0.7, 0.2)).unwrap(),
            b_hat: Vec3::new(0.01, 0.0, -0.02),
            h_tilde: LogicVar::POS,
        };
        let (qd, _) = observer_flow_rate(&obs, &q, &Vec3::new(0.2, 0.1, 0.0), &gains());
        assert!(obs.q_ei.as_quaternion().dot(&qd).abs() < 1e-15);
    }
}
