//! Measurement noise, gyro bias random walk, external disturbance torque and
//! actuator saturation.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quaternion::{Quaternion, UnitQuaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("{field} = {value} must be finite and nonnegative")]
    Negative { field: &'static str, value: f64 },
    #[error("torque limit must be positive, got {0}")]
    TorqueLimit(f64),
}

/// Sensor noise levels in the units the datasheet would use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Half angle of the cone the measured eigenaxis is drawn from.
    pub attitude_cone_half_angle_deg: f64,
    /// Per-axis standard deviation of the white gyro noise v(t).
    pub gyro_sigma_deg_s: f64,
    /// Per-axis standard deviation of the bias-walk driving noise v_b(t).
    pub bias_walk_sigma_deg_s2: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            attitude_cone_half_angle_deg: 0.0,
            gyro_sigma_deg_s: 0.0,
            bias_walk_sigma_deg_s2: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        for (field, value) in [
            ("attitude_cone_half_angle_deg", self.attitude_cone_half_angle_deg),
            ("gyro_sigma_deg_s", self.gyro_sigma_deg_s),
            ("bias_walk_sigma_deg_s2", self.bias_walk_sigma_deg_s2),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(SensorError::Negative { field, value });
            }
        }
        Ok(())
    }

    pub fn cone_half_angle_rad(&self) -> f64 {
        self.attitude_cone_half_angle_deg.to_radians()
    }

    pub fn gyro_sigma_rad_s(&self) -> f64 {
        self.gyro_sigma_deg_s.to_radians()
    }

    pub fn bias_walk_sigma_rad_s2(&self) -> f64 {
        self.bias_walk_sigma_deg_s2.to_radians()
    }

    pub fn is_noiseless(&self) -> bool {
        self.attitude_cone_half_angle_deg == 0.0 && self.gyro_sigma_deg_s == 0.0 && self.bias_walk_sigma_deg_s2 == 0.0
    }
}

/// d(t) = A [cos wt, cos wt, −sin wt].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    pub amplitude_n_m: f64,
    pub frequency_rad_s: f64,
    pub enabled: bool,
}

impl DisturbanceConfig {
    pub fn disabled() -> Self {
        Self {
            amplitude_n_m: 0.0,
            frequency_rad_s: 0.0,
            enabled: false,
        }
    }
}

/// Below this vector-part norm the eigenaxis is treated as undefined.
pub const EIGENAXIS_EPS: f64 = 1e-12;

/// Tilts the eigenaxis of `q_true` by an angle drawn uniformly in
/// `[0, half_cone]` towards a uniformly drawn orthogonal direction. The
/// rotation angle (and so the scalar part) is preserved.
pub fn measure_attitude<R: Rng + ?Sized>(q_true: &UnitQuaternion, cfg: &NoiseConfig, rng: &mut R) -> UnitQuaternion {
    let half_cone = cfg.cone_half_angle_rad();
    if half_cone == 0.0 {
        return *q_true;
    }
    // Draw first so the stream does not depend on the state.
    let tilt = rng.random::<f64>() * half_cone;
    let psi = rng.random::<f64>() * std::f64::consts::TAU;
    let v = q_true.vector();
    let s = v.norm();
    if s < EIGENAXIS_EPS {
        return *q_true;
    }
    let eta = v / s;
    let (e1, e2) = orthonormal_pair(&eta);
    let dir = e1 * psi.cos() + e2 * psi.sin();
    let eta_m = eta * tilt.cos() + dir * tilt.sin();
    UnitQuaternion::new_unchecked(Quaternion::from_parts(q_true.q0(), eta_m * s))
}

fn orthonormal_pair(n: &Vec3) -> (Vec3, Vec3) {
    let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = n.cross(&seed).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

/// Draws the white gyro noise v (rad/s).
pub fn sample_gyro_noise<R: Rng + ?Sized>(cfg: &NoiseConfig, rng: &mut R) -> Vec3 {
    gaussian_vec(cfg.gyro_sigma_rad_s(), rng)
}

/// ω_m = ω + b + v.
pub fn measure_gyro<R: Rng + ?Sized>(omega_true: &Vec3, bias: &Vec3, cfg: &NoiseConfig, rng: &mut R) -> Vec3 {
    omega_true + bias + sample_gyro_noise(cfg, rng)
}

/// b ← b + w dt with w per-axis Gaussian of std `bias_walk_sigma` (rad/s²).
pub fn bias_step<R: Rng + ?Sized>(bias: &Vec3, cfg: &NoiseConfig, dt: f64, rng: &mut R) -> Vec3 {
    bias + gaussian_vec(cfg.bias_walk_sigma_rad_s2(), rng) * dt
}

fn gaussian_vec<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Vec3 {
    if sigma == 0.0 {
        return Vec3::zeros();
    }
    let n = Normal::new(0.0, sigma).expect("sigma validated nonnegative");
    Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

pub fn disturbance(t: f64, cfg: &DisturbanceConfig) -> Vec3 {
    if !cfg.enabled {
        return Vec3::zeros();
    }
    let (s, c) = (cfg.frequency_rad_s * t).sin_cos();
    Vec3::new(c, c, -s) * cfg.amplitude_n_m
}

/// Componentwise clamp to `[-u_max, u_max]`.
pub fn saturate_torque(u: &Vec3, u_max: f64) -> Vec3 {
    u.map(|x| x.clamp(-u_max, u_max))
}
