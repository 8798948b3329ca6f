//! Ready-made scenarios for the three tracking examples and the
//! large-angle regulation maneuver.

use crate::config::{
    ControllerSection, FilterSection, ObserverSection, PlantSection, ScenarioConfig, SensorSection, TrajectorySection,
};
use crate::rigid_body::TrajectoryProfile;
use crate::sensors::DisturbanceConfig;
use crate::sim::{ScenarioKind, SimConfig};

pub const PRESET_NAMES: [&str; 4] = ["example1", "example2", "example3", "fig3"];

pub const DEFAULT_SEED: u64 = 20_240_501;
pub const DT_S: f64 = 0.01;
pub const TORQUE_LIMIT_N_M: f64 = 5.0;
pub const EXAMPLE2_BIAS_RAD_S: [f64; 3] = [0.01, -0.05, 0.02];

const INERTIA: [[f64; 3]; 3] = [[15.0, 0.0, 0.0], [0.0, 20.0, 0.0], [0.0, 0.0, 10.0]];

fn plant(q: [f64; 3], omega: [f64; 3]) -> PlantSection {
    let q0 = (1.0 - q.iter().map(|x| x * x).sum::<f64>()).max(0.0).sqrt();
    PlantSection {
        inertia_kg_m2: INERTIA,
        attitude0_quat: [q0, q[0], q[1], q[2]],
        omega0_rad_s: omega,
    }
}

fn tracking() -> TrajectorySection {
    TrajectorySection {
        attitude0_quat: [1.0, 0.0, 0.0, 0.0],
        profile: TrajectoryProfile::Sinusoid {
            amplitude_rad_s: [0.01; 3],
            frequency_rad_s: 0.01,
        },
    }
}

fn sensors(noisy: bool, bias_walk: bool, bias0: [f64; 3]) -> SensorSection {
    let s = if noisy { 0.01 } else { 0.0 };
    SensorSection {
        attitude_cone_half_angle_deg: s,
        gyro_sigma_deg_s: s,
        bias_walk_sigma_deg_s2: if bias_walk { s } else { 0.0 },
        gyro_bias0_rad_s: bias0,
    }
}

fn disturbance(on: bool) -> DisturbanceConfig {
    if on {
        DisturbanceConfig {
            amplitude_n_m: 0.02,
            frequency_rad_s: 0.1,
            enabled: true,
        }
    } else {
        DisturbanceConfig::disabled()
    }
}

fn full_state_gains(alpha1: f64) -> ControllerSection {
    ControllerSection {
        k1: 1.1,
        k2: 4.0,
        k3: None,
        alpha1: Some(alpha1),
        alpha2: None,
        alpha3: None,
        delta: 0.3,
        h0: 1,
        h_tilde0: None,
        torque_limit_n_m: Some(TORQUE_LIMIT_N_M),
    }
}

fn suffix(noisy: bool) -> &'static str {
    if noisy {
        "noisy"
    } else {
        "clean"
    }
}

/// Full-state tracking. `noisy` enables attitude and gyro noise (no bias)
/// plus the sinusoidal disturbance.
pub fn example1(alpha1: f64, noisy: bool) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("example1_{}_a{alpha1}", suffix(noisy)),
        kind: ScenarioKind::FullState,
        seed: DEFAULT_SEED,
        plant: plant([0.6, -0.8, 0.0], [0.3, -0.4, 0.0]),
        trajectory: tracking(),
        controller: full_state_gains(alpha1),
        observer: None,
        filter: None,
        sensors: sensors(noisy, false, [0.0; 3]),
        disturbance: disturbance(noisy),
        sim: SimConfig::new(DT_S, 150.0),
    }
}

/// Biased gyro with the hybrid bias observer. The constant bias is always
/// present; `noisy` adds the bias walk, sensor noise and disturbance.
pub fn example2(alpha1: f64, noisy: bool) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("example2_{}_a{alpha1}", suffix(noisy)),
        kind: ScenarioKind::BiasedGyro,
        seed: DEFAULT_SEED,
        plant: plant([0.6, -0.8, 0.0], [0.3, -0.4, 0.0]),
        trajectory: tracking(),
        controller: ControllerSection {
            h_tilde0: Some(1),
            ..full_state_gains(alpha1)
        },
        observer: Some(ObserverSection {
            mu1: 0.33,
            mu2: 0.12,
            beta1: 0.75,
            beta2: None,
            b_hat0_rad_s: [0.0; 3],
            q_ei0_quat: None,
        }),
        filter: None,
        sensors: sensors(noisy, true, EXAMPLE2_BIAS_RAD_S),
        disturbance: disturbance(noisy),
        sim: SimConfig::new(DT_S, 150.0),
    }
}

/// Attitude-only feedback through the quaternion filter.
pub fn example3(alpha3: f64, noisy: bool) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("example3_{}_a{alpha3}", suffix(noisy)),
        kind: ScenarioKind::AttitudeOnly,
        seed: DEFAULT_SEED,
        plant: plant([0.6, -0.8, 0.0], [0.3, -0.4, 0.0]),
        trajectory: tracking(),
        controller: ControllerSection {
            k1: 1.2,
            k2: 2.4,
            k3: Some(1.1),
            alpha1: None,
            alpha2: None,
            alpha3: Some(alpha3),
            delta: 0.3,
            h0: 1,
            h_tilde0: Some(1),
            torque_limit_n_m: Some(TORQUE_LIMIT_N_M),
        },
        observer: None,
        filter: Some(FilterSection { q_ed0_quat: None }),
        sensors: sensors(noisy, false, [0.0; 3]),
        disturbance: disturbance(noisy),
        sim: SimConfig::new(DT_S, 150.0),
    }
}

/// Large-angle regulation from q(0) = [1, 0, 0], ω(0) = 0 with the
/// example-1 noise and disturbance.
pub fn fig3() -> ScenarioConfig {
    ScenarioConfig {
        name: "fig3_regulation".into(),
        kind: ScenarioKind::FullState,
        seed: DEFAULT_SEED,
        plant: plant([1.0, 0.0, 0.0], [0.0; 3]),
        trajectory: TrajectorySection {
            attitude0_quat: [1.0, 0.0, 0.0, 0.0],
            profile: TrajectoryProfile::Regulation,
        },
        controller: full_state_gains(0.6),
        observer: None,
        filter: None,
        sensors: sensors(true, false, [0.0; 3]),
        disturbance: disturbance(true),
        sim: SimConfig::new(DT_S, 100.0),
    }
}

/// Named preset with its default exponent and full uncertainties.
pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    match name {
        "example1" => Some(example1(0.6, true)),
        "example2" => Some(example2(0.6, true)),
        "example3" => Some(example3(0.75, true)),
        "fig3" => Some(fig3()),
        _ => None,
    }
}

/// Every preset variant, clean and noisy.
pub fn all() -> Vec<ScenarioConfig> {
    let mut v = Vec::new();
    for noisy in [false, true] {
        for a in [0.6, 0.8, 1.0] {
            v.push(example1(a, noisy));
            v.push(example2(a, noisy));
        }
        for a in [0.75, 0.85, 1.0] {
            v.push(example3(a, noisy));
        }
    }
    v.push(fig3());
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quaternion::Vec3;

    #[test]
    fn example1_values() {
        let sc = example1(0.6, true).build().unwrap();
        assert_eq!(sc.inertia.rows(), INERTIA);
        assert_eq!(sc.initial.attitude.to_array(), [0.0, 0.6, -0.8, 0.0]);
        assert_eq!(sc.initial.omega, Vec3::new(0.3, -0.4, 0.0));
        let (k1, _) = sc.controller.v1_params();
        assert_eq!(k1, 1.1);
        assert_eq!(sc.controller.delta(), 0.3);
        assert_eq!(sc.h0.as_i8(), 1);
        assert_eq!(sc.bias0, Vec3::zeros());
    }

    #[test]
    fn example2_values() {
        let cfg = example2(0.6, false);
        let o = cfg.observer.as_ref().unwrap();
        assert_eq!((o.mu1, o.mu2, o.beta1), (0.33, 0.12, 0.75));
        assert_eq!(o.b_hat0_rad_s, [0.0; 3]);
        let sc = cfg.build().unwrap();
        assert_eq!(sc.bias0, Vec3::from(EXAMPLE2_BIAS_RAD_S));
        assert_eq!(sc.noise.bias_walk_sigma_deg_s2, 0.0);
    }

    #[test]
    fn example3_values() {
        for a in [0.75, 0.85, 1.0] {
            let c = example3(a, false).controller;
            assert_eq!((c.k1, c.k2, c.k3), (1.2, 2.4, Some(1.1)));
        }
    }

    #[test]
    fn names_resolve() {
        for n in PRESET_NAMES {
            by_name(n).unwrap().build().unwrap();
        }
        assert!(by_name("example4").is_none());
    }
}
