//! Human-editable scenario files (TOML). Every physical field carries its
//! unit in the name; quaternions are scalar-first `[q0, q1, q2, q3]`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{FullStateGains, LogicVar, ObserverGains, OutputFeedbackGains};
use crate::quaternion::{Quaternion, UnitQuaternion, Vec3, UNIT_NORM_TOL};
use crate::rigid_body::{error_quaternion, BodyState, DesiredTrajectory, InertiaMatrix, TrajectoryProfile};
use crate::sensors::{DisturbanceConfig, NoiseConfig};
use crate::sim::{ControllerSpec, Scenario, ScenarioKind, SimConfig};

/// Relative tolerance on user-supplied coupled exponents (α₂, β₂, α₁).
const COUPLING_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("field `{field}`: {constraint}")]
    Invalid { field: String, constraint: String },
}

impl ConfigError {
    fn invalid(field: &str, constraint: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            constraint: constraint.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub inertia_kg_m2: [[f64; 3]; 3],
    pub attitude0_quat: [f64; 4],
    pub omega0_rad_s: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub attitude0_quat: [f64; 4],
    pub profile: TrajectoryProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub k1: f64,
    pub k2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    /// Optional; must equal 2α₁/(1+α₁) when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha3: Option<f64>,
    pub delta: f64,
    pub h0: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_tilde0: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_limit_n_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub mu1: f64,
    pub mu2: f64,
    pub beta1: f64,
    /// Optional; must equal 2β₁ − 1 when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    pub b_hat0_rad_s: [f64; 3],
    /// Defaults to the plant's initial attitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ei0_quat: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    /// Defaults to the initial error quaternion Q_e(0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ed0_quat: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub attitude_cone_half_angle_deg: f64,
    pub gyro_sigma_deg_s: f64,
    pub bias_walk_sigma_deg_s2: f64,
    /// True gyro bias b(0).
    pub gyro_bias0_rad_s: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub plant: PlantSection,
    pub trajectory: TrajectorySection,
    pub controller: ControllerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSection>,
    pub sensors: SensorSection,
    pub disturbance: DisturbanceConfig,
    pub sim: SimConfig,
}

fn unit_quat(field: &str, a: [f64; 4]) -> Result<UnitQuaternion, ConfigError> {
    let q = Quaternion::from_array(a);
    let n = q.norm();
    if !n.is_finite() || n < 1e-9 {
        return Err(ConfigError::invalid(
            field,
            format!("quaternion norm {n} cannot be normalized"),
        ));
    }
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        log::warn!("{field}: quaternion norm {n} is not one; normalizing");
    }
    Ok(UnitQuaternion::new_unchecked(q * (1.0 / n)))
}

fn logic(field: &str, v: i64) -> Result<LogicVar, ConfigError> {
    LogicVar::new(v).map_err(|_| ConfigError::invalid(field, format!("must be +1 or -1, got {v}")))
}

fn finite(field: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, "must be finite"))
    }
}

fn coupled(field: &str, given: Option<f64>, expected: f64, rule: &str) -> Result<(), ConfigError> {
    match given {
        Some(v) if (v - expected).abs() > COUPLING_TOL * (1.0 + expected.abs()) => Err(ConfigError::invalid(
            field,
            format!("coupling {rule} requires {expected}, got {v}"),
        )),
        _ => Ok(()),
    }
}

fn require(field: &str, v: Option<f64>, kind: ScenarioKind) -> Result<f64, ConfigError> {
    v.ok_or_else(|| ConfigError::invalid(field, format!("required for kind {}", kind.as_str())))
}

fn forbid<T>(field: &str, v: &Option<T>, kind: ScenarioKind) -> Result<(), ConfigError> {
    match v {
        Some(_) => Err(ConfigError::invalid(
            field,
            format!("not used by kind {}", kind.as_str()),
        )),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    /// Reads and validates a scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg = Self::from_toml_str(&text)?;
        cfg.build()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            attitude_cone_half_angle_deg: self.sensors.attitude_cone_half_angle_deg,
            gyro_sigma_deg_s: self.sensors.gyro_sigma_deg_s,
            bias_walk_sigma_deg_s2: self.sensors.bias_walk_sigma_deg_s2,
            seed: self.seed,
        }
    }

    /// Validates every field and coupling and assembles the simulator input.
    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let kind = self.kind;
        let p = &self.plant;
        for row in &p.inertia_kg_m2 {
            finite("plant.inertia_kg_m2", row)?;
        }
        finite("plant.omega0_rad_s", &p.omega0_rad_s)?;
        let inertia = InertiaMatrix::new(nalgebra::Matrix3::from_fn(|i, j| p.inertia_kg_m2[i][j]))
            .map_err(|e| ConfigError::invalid("plant.inertia_kg_m2", e.to_string()))?;
        let initial = BodyState {
            attitude: unit_quat("plant.attitude0_quat", p.attitude0_quat)?,
            omega: Vec3::from(p.omega0_rad_s),
        };
        if let TrajectoryProfile::Sinusoid {
            amplitude_rad_s,
            frequency_rad_s,
        } = self.trajectory.profile
        {
            finite("trajectory.profile.amplitude_rad_s", &amplitude_rad_s)?;
            finite("trajectory.profile.frequency_rad_s", &[frequency_rad_s])?;
        }
        if let TrajectoryProfile::Constant { omega_rad_s } = self.trajectory.profile {
            finite("trajectory.profile.omega_rad_s", &omega_rad_s)?;
        }
        let trajectory = DesiredTrajectory {
            attitude0: unit_quat("trajectory.attitude0_quat", self.trajectory.attitude0_quat)?,
            profile: self.trajectory.profile,
        };

        let c = &self.controller;
        let gain_err = |e: crate::control::ControlError| ConfigError::invalid("controller", e.to_string());
        if !(c.delta > 0.0 && c.delta < 1.0) {
            return Err(ConfigError::invalid(
                "controller.delta",
                format!("must lie in (0, 1), got {}", c.delta),
            ));
        }
        let h0 = logic("controller.h0", c.h0)?;
        if let Some(lim) = c.torque_limit_n_m {
            if !(lim.is_finite() && lim > 0.0) {
                return Err(ConfigError::invalid("controller.torque_limit_n_m", "must be > 0"));
            }
        }

        let controller = match kind {
            ScenarioKind::FullState | ScenarioKind::BiasedGyro => {
                forbid("controller.k3", &c.k3, kind)?;
                forbid("controller.alpha3", &c.alpha3, kind)?;
                forbid("filter", &self.filter, kind)?;
                let alpha1 = require("controller.alpha1", c.alpha1, kind)?;
                let gains = FullStateGains::new(c.k1, c.k2, alpha1, c.delta).map_err(gain_err)?;
                coupled(
                    "controller.alpha2",
                    c.alpha2,
                    gains.alpha2,
                    "alpha2 = 2 alpha1/(1+alpha1)",
                )?;
                if kind == ScenarioKind::FullState {
                    forbid("observer", &self.observer, kind)?;
                    forbid("controller.h_tilde0", &c.h_tilde0, kind)?;
                    ControllerSpec::FullState { gains }
                } else {
                    let o = self
                        .observer
                        .as_ref()
                        .ok_or_else(|| ConfigError::invalid("observer", "required for kind biased_gyro"))?;
                    let observer = ObserverGains::new(o.mu1, o.mu2, o.beta1, c.delta)
                        .map_err(|e| ConfigError::invalid("observer", e.to_string()))?;
                    coupled("observer.beta2", o.beta2, observer.beta2, "beta2 = 2 beta1 - 1")?;
                    finite("observer.b_hat0_rad_s", &o.b_hat0_rad_s)?;
                    let q_ei0 = match o.q_ei0_quat {
                        Some(a) => unit_quat("observer.q_ei0_quat", a)?,
                        None => initial.attitude,
                    };
                    ControllerSpec::BiasedGyro {
                        gains,
                        observer,
                        h_tilde0: logic("controller.h_tilde0", c.h_tilde0.unwrap_or(1))?,
                        q_ei0,
                        b_hat0: Vec3::from(o.b_hat0_rad_s),
                    }
                }
            }
            ScenarioKind::AttitudeOnly => {
                forbid("observer", &self.observer, kind)?;
                let k3 = require("controller.k3", c.k3, kind)?;
                let alpha3 = require("controller.alpha3", c.alpha3, kind)?;
                let gains = OutputFeedbackGains::new(c.k1, c.k2, k3, alpha3, c.delta).map_err(gain_err)?;
                coupled("controller.alpha1", c.alpha1, gains.alpha1, "alpha1 = 2 alpha3 - 1")?;
                if c.alpha2.is_some() {
                    return Err(ConfigError::invalid(
                        "controller.alpha2",
                        "not used by kind attitude_only",
                    ));
                }
                let q_ed0 = match self.filter.as_ref().and_then(|f| f.q_ed0_quat) {
                    Some(a) => unit_quat("filter.q_ed0_quat", a)?,
                    None => error_quaternion(&trajectory.attitude0, &initial.attitude),
                };
                ControllerSpec::AttitudeOnly {
                    gains,
                    h_tilde0: logic("controller.h_tilde0", c.h_tilde0.unwrap_or(1))?,
                    q_ed0,
                }
            }
        };

        let noise = self.noise();
        noise
            .validate()
            .map_err(|e| ConfigError::invalid("sensors", e.to_string()))?;
        finite("sensors.gyro_bias0_rad_s", &self.sensors.gyro_bias0_rad_s)?;
        if kind != ScenarioKind::BiasedGyro
            && (self.sensors.gyro_bias0_rad_s != [0.0; 3] || self.sensors.bias_walk_sigma_deg_s2 != 0.0)
        {
            log::warn!(
                "sensors: gyro bias is only modelled for kind biased_gyro; ignored for {}",
                kind.as_str()
            );
        }
        let d = &self.disturbance;
        finite("disturbance", &[d.amplitude_n_m, d.frequency_rad_s])?;
        self.sim
            .validate()
            .map_err(|e| ConfigError::invalid("sim", e.to_string()))?;

        Ok(Scenario {
            inertia,
            initial,
            trajectory,
            controller,
            h0,
            bias0: if kind == ScenarioKind::BiasedGyro {
                Vec3::from(self.sensors.gyro_bias0_rad_s)
            } else {
                Vec3::zeros()
            },
            noise,
            disturbance: *d,
            torque_limit: c.torque_limit_n_m,
            sim: self.sim,
        })
    }

    /// Sets a scalar parameter by name; used by sweeps and CLI overrides.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let c = &mut self.controller;
        match name {
            "k1" => c.k1 = value,
            "k2" => c.k2 = value,
            "k3" => c.k3 = Some(value),
            "alpha1" => {
                c.alpha1 = Some(value);
                c.alpha2 = None;
            }
            "alpha3" => {
                c.alpha3 = Some(value);
                c.alpha1 = None;
            }
            "delta" => c.delta = value,
            "mu1" | "mu2" | "beta1" => {
                let o = self
                    .observer
                    .as_mut()
                    .ok_or_else(|| ConfigError::invalid(name, "scenario has no observer section"))?;
                match name {
                    "mu1" => o.mu1 = value,
                    "mu2" => o.mu2 = value,
                    _ => {
                        o.beta1 = value;
                        o.beta2 = None;
                    }
                }
            }
            "seed" => {
                if value < 0.0 || value.fract() != 0.0 || value > u64::MAX as f64 {
                    return Err(ConfigError::invalid("seed", "must be a non-negative integer"));
                }
                self.seed = value as u64;
            }
            "dt_s" => self.sim.dt_s = value,
            "t_final_s" => self.sim.t_final_s = value,
            _ => return Err(ConfigError::invalid(
                name,
                "unknown sweep parameter (k1, k2, k3, alpha1, alpha3, delta, mu1, mu2, beta1, seed, dt_s, t_final_s)",
            )),
        }
        Ok(())
    }
}
