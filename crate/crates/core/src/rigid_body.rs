//! Rigid-body attitude kinematics and dynamics, and the tracking-error
//! equations relative to a desired frame.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quaternion::{quat_mul, rotation_matrix, skew, Mat3, Quaternion, UnitQuaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InertiaError {
    #[error("inertia matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("inertia matrix is not positive definite (min eigenvalue {0})")]
    NotPositiveDefinite(f64),
}

/// Symmetric positive-definite inertia matrix (kg·m²) with cached inverse
/// and extreme eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaMatrix {
    j: Mat3,
    inv: Mat3,
    lambda_min: f64,
    lambda_max: f64,
}

impl InertiaMatrix {
    pub fn new(j: Mat3) -> Result<Self, InertiaError> {
        let asym = (j - j.transpose()).amax();
        if !asym.is_finite() || asym > 1e-12 {
            return Err(InertiaError::NotSymmetric(asym));
        }
        let eig = SymmetricEigen::new(j);
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if lambda_min.is_nan() || lambda_min <= 0.0 {
            return Err(InertiaError::NotPositiveDefinite(lambda_min));
        }
        let inv = j.try_inverse().ok_or(InertiaError::NotPositiveDefinite(lambda_min))?;
        Ok(Self {
            j,
            inv,
            lambda_min,
            lambda_max,
        })
    }

    pub fn diagonal(jx: f64, jy: f64, jz: f64) -> Result<Self, InertiaError> {
        Self::new(Mat3::from_diagonal(&Vec3::new(jx, jy, jz)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.j
    }

    pub fn inverse(&self) -> &Mat3 {
        &self.inv
    }

    /// λ_m(J).
    pub fn min_eigenvalue(&self) -> f64 {
        self.lambda_min
    }

    /// Induced 2-norm ‖J‖ (largest eigenvalue).
    pub fn norm(&self) -> f64 {
        self.lambda_max
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.j;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

/// Attitude of the body frame in the inertial frame, and body rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub attitude: UnitQuaternion,
    pub omega: Vec3,
}

/// Shape of the desired angular velocity ω_d(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryProfile {
    /// ω_d ≡ 0.
    Regulation,
    /// ω_d(t) = a ∘ sin(w t) componentwise.
    Sinusoid {
        amplitude_rad_s: [f64; 3],
        frequency_rad_s: f64,
    },
    /// ω_d ≡ constant.
    Constant { omega_rad_s: [f64; 3] },
}

/// Desired frame: initial attitude plus analytic ω_d(t), ω̇_d(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredTrajectory {
    pub attitude0: UnitQuaternion,
    pub profile: TrajectoryProfile,
}

impl DesiredTrajectory {
    pub fn regulation(attitude: UnitQuaternion) -> Self {
        Self {
            attitude0: attitude,
            profile: TrajectoryProfile::Regulation,
        }
    }

    pub fn omega_d(&self, t: f64) -> Vec3 {
        match self.profile {
            TrajectoryProfile::Regulation => Vec3::zeros(),
            TrajectoryProfile::Sinusoid {
                amplitude_rad_s: a,
                frequency_rad_s: w,
            } => Vec3::from(a) * (w * t).sin(),
            TrajectoryProfile::Constant { omega_rad_s } => Vec3::from(omega_rad_s),
        }
    }

    pub fn omega_d_dot(&self, t: f64) -> Vec3 {
        match self.profile {
            TrajectoryProfile::Regulation => Vec3::zeros(),
            TrajectoryProfile::Sinusoid {
                amplitude_rad_s: a,
                frequency_rad_s: w,
            } => Vec3::from(a) * (w * (w * t).cos()),
            TrajectoryProfile::Constant { .. } => Vec3::zeros(),
        }
    }

    /// Sup-norm bounds (ω̄₁, ω̄₂) on ‖ω_d‖ and ‖ω̇_d‖.
    pub fn bounds(&self) -> (f64, f64) {
        match self.profile {
            TrajectoryProfile::Regulation => (0.0, 0.0),
            TrajectoryProfile::Sinusoid {
                amplitude_rad_s: a,
                frequency_rad_s: w,
            } => {
                let n = Vec3::from(a).norm();
                (n, n * w.abs())
            }
            TrajectoryProfile::Constant { omega_rad_s } => (Vec3::from(omega_rad_s).norm(), 0.0),
        }
    }

    /// Checks the bounds on `samples` evenly spaced times in `[0, horizon]`.
    pub fn bounds_hold(&self, horizon: f64, samples: usize) -> bool {
        let (w1, w2) = self.bounds();
        (0..=samples).all(|i| {
            let t = horizon * i as f64 / samples.max(1) as f64;
            self.omega_d(t).norm() <= w1 * (1.0 + 1e-12) && self.omega_d_dot(t).norm() <= w2 * (1.0 + 1e-12)
        })
    }
}

/// Tracking error of the body frame relative to the desired frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    pub q_e: UnitQuaternion,
    pub omega_e: Vec3,
    /// ω̄_d = R(Q_e) ω_d.
    pub omega_d_body: Vec3,
}

impl ErrorState {
    pub fn from_states(body: &BodyState, q_d: &UnitQuaternion, omega_d: &Vec3) -> Self {
        let q_e = error_quaternion(q_d, &body.attitude);
        let (omega_e, omega_d_body) = error_velocity(&body.omega, &q_e, omega_d);
        Self {
            q_e,
            omega_e,
            omega_d_body,
        }
    }
}

/// Q̇ = ½ Q ⊗ [0, ωᵀ]ᵀ.
pub fn kinematics_rate(q: &UnitQuaternion, omega: &Vec3) -> Quaternion {
    quat_mul(q.as_quaternion(), &Quaternion::pure(*omega)) * 0.5
}

/// Same as [`kinematics_rate`] for a quaternion that may have drifted off 𝕊³
/// inside an integrator stage.
pub fn kinematics_rate_raw(q: &Quaternion, omega: &Vec3) -> Quaternion {
    quat_mul(q, &Quaternion::pure(*omega)) * 0.5
}

/// ω̇ = J⁻¹(−ω × Jω + u).
pub fn dynamics_rate(j: &InertiaMatrix, omega: &Vec3, u: &Vec3) -> Vec3 {
    j.inverse() * (-omega.cross(&(j.matrix() * omega)) + u)
}

/// Q_e = Q_d* ⊗ Q.
pub fn error_quaternion(q_d: &UnitQuaternion, q: &UnitQuaternion) -> UnitQuaternion {
    q_d.conjugate().mul(q)
}

/// Returns (ω_e, ω̄_d) with ω̄_d = R(Q_e) ω_d and ω_e = ω − ω̄_d.
pub fn error_velocity(omega: &Vec3, q_e: &UnitQuaternion, omega_d: &Vec3) -> (Vec3, Vec3) {
    let omega_d_body = rotation_matrix(q_e) * omega_d;
    (omega - omega_d_body, omega_d_body)
}

/// Ξ(ω_e, ω̄_d) = (J(ω_e + ω̄_d))× − ω̄_d× J − J ω̄_d×, skew-symmetric.
pub fn xi_matrix(j: &InertiaMatrix, omega_e: &Vec3, omega_d_body: &Vec3) -> Mat3 {
    let jm = j.matrix();
    let wd = skew(omega_d_body);
    skew(&(jm * (omega_e + omega_d_body))) - wd * jm - jm * wd
}

/// u_d = ω̄_d× J ω̄_d + J R(Q_e) ω̇_d.
pub fn feedforward_torque(j: &InertiaMatrix, q_e: &UnitQuaternion, omega_d: &Vec3, omega_d_dot: &Vec3) -> Vec3 {
    let r = rotation_matrix(q_e);
    let wd = r * omega_d;
    let jm = j.matrix();
    wd.cross(&(jm * wd)) + jm * (r * omega_d_dot)
}

/// Relative equations of motion: returns (Q̇_e, ω̇_e) with
/// J ω̇_e = Ξ ω_e − ω̄_d× J ω̄_d − J R(Q_e) ω̇_d + u.
pub fn error_dynamics_rate(j: &InertiaMatrix, err: &ErrorState, omega_d_dot: &Vec3, u: &Vec3) -> (Quaternion, Vec3) {
    let q_dot = kinematics_rate(&err.q_e, &err.omega_e);
    let jm = j.matrix();
    let wd = err.omega_d_body;
    let rhs = xi_matrix(j, &err.omega_e, &wd) * err.omega_e
        - wd.cross(&(jm * wd))
        - jm * (rotation_matrix(&err.q_e) * omega_d_dot)
        + u;
    (q_dot, j.inverse() * rhs)
}
