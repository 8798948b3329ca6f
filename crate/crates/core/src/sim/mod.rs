//! Fixed-step hybrid simulation of the plant with one of the three closed
//! loops: RK4 over flows, hysteresis jumps resolved at step boundaries.

mod engine;
mod trace;

pub use engine::{resolve_jumps, run_scenario, HeldNoise, Measurement, SimState, Simulator};
pub use trace::{JumpEvent, JumpVariable, SimTrace, TraceError, TraceRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{FullStateGains, LogicVar, ObserverGains, OutputFeedbackGains};
use crate::quaternion::{UnitQuaternion, Vec3};
use crate::rigid_body::{BodyState, DesiredTrajectory, InertiaMatrix};
use crate::sensors::{DisturbanceConfig, NoiseConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("more than {max} consecutive jumps at step {step} (t = {t} s); Zeno-like behaviour")]
    Zeno { step: usize, t: f64, max: usize },
    #[error("integrator blow-up (non-finite state) at step {step} (t = {t} s)")]
    Blowup { step: usize, t: f64 },
}

/// How the commanded torque is applied inside an integration step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TorqueHold {
    /// Computed once from the step-start measurements and held.
    #[default]
    ZeroOrder,
    /// Re-evaluated at every RK4 stage, giving the continuous-time closed
    /// loop. Used to check flow identities that ZOH would blur.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FullState,
    BiasedGyro,
    AttitudeOnly,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::FullState => "full_state",
            ScenarioKind::BiasedGyro => "biased_gyro",
            ScenarioKind::AttitudeOnly => "attitude_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt_s: f64,
    pub t_final_s: f64,
    #[serde(default = "default_max_jumps")]
    pub max_consecutive_jumps: usize,
    #[serde(default = "default_true")]
    pub renormalize_every_step: bool,
    #[serde(default)]
    pub torque_hold: TorqueHold,
}

fn default_max_jumps() -> usize {
    4
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn new(dt_s: f64, t_final_s: f64) -> Self {
        Self {
            dt_s,
            t_final_s,
            max_consecutive_jumps: default_max_jumps(),
            renormalize_every_step: true,
            torque_hold: TorqueHold::ZeroOrder,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(SimError::Config(format!("dt_s = {} must be > 0", self.dt_s)));
        }
        if !(self.t_final_s.is_finite() && self.t_final_s > 0.0) {
            return Err(SimError::Config(format!("t_final_s = {} must be > 0", self.t_final_s)));
        }
        if self.max_consecutive_jumps < 1 {
            return Err(SimError::Config("max_consecutive_jumps must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the horizon is rounded to a whole number of steps.
    pub fn steps(&self) -> usize {
        (self.t_final_s / self.dt_s).round() as usize
    }
}

/// Closed loop under simulation together with its auxiliary initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerSpec {
    FullState {
        gains: FullStateGains,
    },
    /// Certainty-equivalence full-state law fed by the hybrid bias observer.
    BiasedGyro {
        gains: FullStateGains,
        observer: ObserverGains,
        h_tilde0: LogicVar,
        q_ei0: UnitQuaternion,
        b_hat0: Vec3,
    },
    AttitudeOnly {
        gains: OutputFeedbackGains,
        h_tilde0: LogicVar,
        q_ed0: UnitQuaternion,
    },
}

impl ControllerSpec {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ControllerSpec::FullState { .. } => ScenarioKind::FullState,
            ControllerSpec::BiasedGyro { .. } => ScenarioKind::BiasedGyro,
            ControllerSpec::AttitudeOnly { .. } => ScenarioKind::AttitudeOnly,
        }
    }

    /// (k₁, α₁) entering V₁.
    pub fn v1_params(&self) -> (f64, f64) {
        match self {
            ControllerSpec::FullState { gains } | ControllerSpec::BiasedGyro { gains, .. } => (gains.k1, gains.alpha1),
            ControllerSpec::AttitudeOnly { gains, .. } => (gains.k1, gains.alpha1),
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            ControllerSpec::FullState { gains } | ControllerSpec::BiasedGyro { gains, .. } => gains.delta,
            ControllerSpec::AttitudeOnly { gains, .. } => gains.delta,
        }
    }
}

/// A fully validated scenario, ready to simulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub inertia: InertiaMatrix,
    pub initial: BodyState,
    pub trajectory: DesiredTrajectory,
    pub controller: ControllerSpec,
    pub h0: LogicVar,
    /// True gyro bias b(0) (rad/s). Only the biased-gyro loop measures it.
    pub bias0: Vec3,
    pub noise: NoiseConfig,
    pub disturbance: DisturbanceConfig,
    /// Componentwise actuator limit (N·m); `None` applies the command as is.
    pub torque_limit: Option<f64>,
    pub sim: SimConfig,
}
