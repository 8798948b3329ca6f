//! Hybrid finite-time attitude tracking: quaternion algebra, rigid-body
//! model, hysteresis-based controllers, sensor models, a fixed-step hybrid
//! simulator and analysis tools.

pub mod analysis;
pub mod config;
pub mod control;
pub mod par;
pub mod presets;
pub mod quaternion;
pub mod rigid_body;
pub mod runner;
pub mod sensors;
pub mod sim;
