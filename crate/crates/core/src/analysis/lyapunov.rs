//! Lyapunov candidates of the three closed loops, their closed-form flow
//! derivatives and the guaranteed decrease across jumps.
//!
//! φ(h·q0, a) is evaluated through the cancellation-free chordal gap
//! 2(1 − h·q0) = 2‖q‖²/(1 + h·q0) so that small values keep full relative
//! precision.

use crate::control::LogicVar;
use crate::quaternion::{kappa1, rho, sat_pow_vec, UnitQuaternion, Vec3};
use crate::rigid_body::InertiaMatrix;

fn phi_stable(q: &UnitQuaternion, h: LogicVar, a: f64) -> f64 {
    q.chordal_gap(h.value()).powf(0.5 * a)
}

/// V₁ = ½ ω_eᵀJω_e + (2k₁/(1+α₁)) φ(h q_e0, 1+α₁).
pub fn lyapunov_v1(q_e: &UnitQuaternion, omega_e: &Vec3, h: LogicVar, j: &InertiaMatrix, k1: f64, alpha1: f64) -> f64 {
    0.5 * omega_e.dot(&(j.matrix() * omega_e)) + 2.0 * k1 / (1.0 + alpha1) * phi_stable(q_e, h, 1.0 + alpha1)
}

/// V₂ = ½ b̃ᵀb̃ + (2μ₂/(1+β₁)) φ(h̃ q̃0, 1+β₁), as published.
pub fn lyapunov_v2(q_tilde: &UnitQuaternion, b_tilde: &Vec3, h_tilde: LogicVar, mu2: f64, beta1: f64) -> f64 {
    0.5 * b_tilde.norm_squared() + 2.0 * mu2 / (1.0 + beta1) * phi_stable(q_tilde, h_tilde, 1.0 + beta1)
}

/// V₃ = V₁ + (2k₂/(1+α₃)) φ(h̃ q̃0, 1+α₃), as published.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_v3(
    q_e: &UnitQuaternion,
    omega_e: &Vec3,
    h: LogicVar,
    q_tilde: &UnitQuaternion,
    h_tilde: LogicVar,
    j: &InertiaMatrix,
    k1: f64,
    k2: f64,
    alpha3: f64,
) -> f64 {
    let alpha1 = 2.0 * alpha3 - 1.0;
    lyapunov_v1(q_e, omega_e, h, j, k1, alpha1) + 2.0 * k2 / (1.0 + alpha3) * phi_stable(q_tilde, h_tilde, 1.0 + alpha3)
}

/// Variant of V₂ whose attitude term uses the exponent 1+β₂ of the bias
/// update law. Along the observer error flow its derivative is
/// −μ₁μ₂ κ₁(h̃Q̃,1−β₁)ᵀκ₁(h̃Q̃,1−β₂) ≤ 0 with no b̃ cross term.
pub fn lyapunov_v2_matched(q_tilde: &UnitQuaternion, b_tilde: &Vec3, h_tilde: LogicVar, mu2: f64, beta1: f64) -> f64 {
    let beta2 = 2.0 * beta1 - 1.0;
    0.5 * b_tilde.norm_squared() + 2.0 * mu2 / (1.0 + beta2) * phi_stable(q_tilde, h_tilde, 1.0 + beta2)
}

/// Variant of V₃ whose filter term uses the exponent 1+α₁ of the torque law.
/// Its derivative is −k₂k₃ κ₁(h̃Q̃,1−α₁)ᵀκ₁(h̃Q̃,1−α₃) ≤ 0.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_v3_matched(
    q_e: &UnitQuaternion,
    omega_e: &Vec3,
    h: LogicVar,
    q_tilde: &UnitQuaternion,
    h_tilde: LogicVar,
    j: &InertiaMatrix,
    k1: f64,
    k2: f64,
    alpha3: f64,
) -> f64 {
    let alpha1 = 2.0 * alpha3 - 1.0;
    lyapunov_v1(q_e, omega_e, h, j, k1, alpha1) + 2.0 * k2 / (1.0 + alpha1) * phi_stable(q_tilde, h_tilde, 1.0 + alpha1)
}

/// V̇₁ = −k₂ ω_eᵀ sat_α₂(ω_e) along the full-state flow.
pub fn vdot1(omega_e: &Vec3, k2: f64, alpha2: f64) -> f64 {
    -k2 * omega_e.dot(&sat_pow_vec(omega_e, alpha2))
}

/// V̇₂ = −μ₁μ₂ ‖κ₁(h̃Q̃, 1−β₁)‖², as published.
pub fn vdot2(q_tilde: &UnitQuaternion, h_tilde: LogicVar, mu1: f64, mu2: f64, beta1: f64) -> f64 {
    -mu1 * mu2 * kappa1(&q_tilde.signed(h_tilde.value()), 1.0 - beta1).norm_squared()
}

/// Exact derivative of the published V₂ along the observer error flow,
/// including the b̃ cross term μ₂ b̃ᵀ[κ₁(·,1−β₂) − κ₁(·,1−β₁)].
pub fn vdot2_exact(q_tilde: &UnitQuaternion, b_tilde: &Vec3, h_tilde: LogicVar, mu1: f64, mu2: f64, beta1: f64) -> f64 {
    let s = q_tilde.signed(h_tilde.value());
    let k_b1 = kappa1(&s, 1.0 - beta1);
    let k_b2 = kappa1(&s, 2.0 - 2.0 * beta1);
    -mu1 * mu2 * k_b1.norm_squared() + mu2 * b_tilde.dot(&(k_b2 - k_b1))
}

/// V̇₃ = −k₁k₂k₃ ‖κ₁(h̃Q̃, 1−α₃)‖², as published.
pub fn vdot3(q_tilde: &UnitQuaternion, h_tilde: LogicVar, k1: f64, k2: f64, k3: f64, alpha3: f64) -> f64 {
    -k1 * k2 * k3 * kappa1(&q_tilde.signed(h_tilde.value()), 1.0 - alpha3).norm_squared()
}

/// Exact derivative of the published V₃ along the attitude-only flow.
#[allow(clippy::too_many_arguments)]
pub fn vdot3_exact(omega_e: &Vec3, q_tilde: &UnitQuaternion, h_tilde: LogicVar, k2: f64, k3: f64, alpha3: f64) -> f64 {
    let s = q_tilde.signed(h_tilde.value());
    let k_a3 = kappa1(&s, 1.0 - alpha3);
    let k_a1 = kappa1(&s, 2.0 - 2.0 * alpha3);
    -k2 * k3 * k_a3.norm_squared() - k2 * omega_e.dot(&(k_a1 - k_a3))
}

/// Minimum decrease (2k/(1+α))·|ρ(−δ, 1+α)| of a term (2k/(1+α))φ(·, 1+α)
/// across a hysteresis jump.
pub fn jump_decrement(gain: f64, alpha: f64, delta: f64) -> f64 {
    let r = rho(-delta, 1.0 + alpha).expect("delta in (0,1)");
    -2.0 * gain * r / (1.0 + alpha)
}

/// σ₁ = −2k₁ρ(−δ, 1+α₁)/(1+α₁).
pub fn sigma1(k1: f64, alpha1: f64, delta: f64) -> f64 {
    jump_decrement(k1, alpha1, delta)
}

/// σ₂ = −2μ₂ρ(−δ, 1+β₁)/(1+β₁).
pub fn sigma2(mu2: f64, beta1: f64, delta: f64) -> f64 {
    jump_decrement(mu2, beta1, delta)
}

/// Joint-jump analogue: at least one of the two terms of V₃ drops, so the
/// smaller of the two decrements is guaranteed.
pub fn sigma3(k1: f64, k2: f64, alpha3: f64, delta: f64) -> f64 {
    let alpha1 = 2.0 * alpha3 - 1.0;
    jump_decrement(k1, alpha1, delta).min(jump_decrement(k2, alpha3, delta))
}
