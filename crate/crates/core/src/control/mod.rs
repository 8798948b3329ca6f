//! Hybrid finite-time control laws, the bias observer and the quaternion
//! filter, each with a hysteresis logic variable.

pub(crate) mod filter;
mod full_state;
pub(crate) mod observer;

pub use filter::{filter_flow_rate, joint_jump_g3, output_feedback_torque, FilterState, OutputFeedbackGains};
pub use full_state::{certainty_equivalence_torque, full_state_torque, FullStateGains};
pub use observer::{observer_flow_rate, observer_jump, ObserverGains, ObserverState};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("gain {name} = {value} violates {constraint}")]
    InvalidGain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("logic variable must be +1 or -1, got {0}")]
    InvalidLogic(i64),
    #[error("state is not in the jump set (h·q0 = {product}, delta = {delta})")]
    NotInJumpSet { product: f64, delta: f64 },
}

/// Binary logic variable h ∈ {−1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LogicVar(i8);

impl LogicVar {
    pub const POS: LogicVar = LogicVar(1);
    pub const NEG: LogicVar = LogicVar(-1);

    pub fn new(v: i64) -> Result<Self, ControlError> {
        match v {
            1 => Ok(Self::POS),
            -1 => Ok(Self::NEG),
            other => Err(ControlError::InvalidLogic(other)),
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.0)
    }

    pub fn as_i8(self) -> i8 {
        self.0
    }

    pub fn flipped(self) -> Self {
        Self(-self.0)
    }
}

impl fmt::Display for LogicVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

/// Outer-semicontinuous sign with sgn̄(0) := +1.
pub fn sgn_bar(x: f64) -> LogicVar {
    if x < 0.0 {
        LogicVar::NEG
    } else {
        LogicVar::POS
    }
}

/// True when `h·scalar ≤ −δ`. The boundary belongs to the jump set.
pub fn in_jump_set(h: LogicVar, scalar: f64, delta: f64) -> bool {
    h.value() * scalar <= -delta
}

/// Hysteresis switching: on `h·scalar ≤ −δ` the logic variable resets to
/// `sgn̄(scalar)`. Returns the new value and whether a jump occurred.
pub fn hysteresis_update(h: LogicVar, scalar: f64, delta: f64) -> (LogicVar, bool) {
    if in_jump_set(h, scalar, delta) {
        (sgn_bar(scalar), true)
    } else {
        (h, false)
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64, ControlError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ControlError::InvalidGain {
            name,
            value,
            constraint: "> 0",
        })
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<f64, ControlError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(delta)
    } else {
        Err(ControlError::InvalidGain {
            name: "delta",
            value: delta,
            constraint: "0 < delta < 1",
        })
    }
}
