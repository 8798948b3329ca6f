//! Independent reference models for the integration tests. The error
//! coordinate equations are written out here from scratch (own quaternion
//! product, κ₁, saturation and rotation matrix) so that they share no code
//! with the simulator they are compared against.
#![allow(dead_code)]

use gftac::config::ScenarioConfig;
use gftac::quaternion::Vec3;
use gftac::rigid_body::DesiredTrajectory;
use gftac::sim::{ControllerSpec, Scenario, SimTrace, TorqueHold};
use nalgebra::{DVector, Matrix3, Vector4};

pub type Q4 = Vector4<f64>;

pub fn qmul(a: &Q4, b: &Q4) -> Q4 {
    let (a0, av) = (a[0], Vec3::new(a[1], a[2], a[3]));
    let (b0, bv) = (b[0], Vec3::new(b[1], b[2], b[3]));
    let v = bv * a0 + av * b0 + av.cross(&bv);
    Q4::new(a0 * b0 - av.dot(&bv), v.x, v.y, v.z)
}

pub fn qconj(a: &Q4) -> Q4 {
    Q4::new(a[0], -a[1], -a[2], -a[3])
}

pub fn pure(v: &Vec3) -> Q4 {
    Q4::new(0.0, v.x, v.y, v.z)
}

pub fn vec_part(q: &Q4) -> Vec3 {
    Vec3::new(q[1], q[2], q[3])
}

/// R(Q)x = Q* ⊗ x ⊗ Q.
pub fn rot(q: &Q4, x: &Vec3) -> Vec3 {
    vec_part(&qmul(&qmul(&qconj(q), &pure(x)), q))
}

/// κ₁(sQ, a) using 2(1 − s q₀) = 2‖q‖²/(1 + s q₀) to avoid cancellation.
pub fn kappa1(q: &Q4, s: f64, a: f64) -> Vec3 {
    let v = vec_part(q) * s;
    let n2 = v.norm_squared();
    if n2 == 0.0 {
        return Vec3::zeros();
    }
    let gap = 2.0 * n2 / (1.0 + s * q[0]);
    v / gap.powf(0.5 * a)
}

pub fn sat(v: &Vec3, a: f64) -> Vec3 {
    v.map(|x| {
        if x == 0.0 {
            0.0
        } else {
            x.signum() * x.abs().powf(a).min(1.0)
        }
    })
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    v.cross_matrix()
}

pub fn rk4<F: Fn(f64, &DVector<f64>) -> DVector<f64>>(f: &F, t: f64, x: &DVector<f64>, dt: f64) -> DVector<f64> {
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &(x + &k1 * (0.5 * dt)));
    let k3 = f(t + 0.5 * dt, &(x + &k2 * (0.5 * dt)));
    let k4 = f(t + dt, &(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn normalize_block(x: &mut DVector<f64>, at: usize) {
    let n = x.rows(at, 4).norm();
    x.rows_mut(at, 4).unscale_mut(n);
}

fn q4(x: &DVector<f64>, at: usize) -> Q4 {
    Q4::new(x[at], x[at + 1], x[at + 2], x[at + 3])
}

fn v3(x: &DVector<f64>, at: usize) -> Vec3 {
    Vec3::new(x[at], x[at + 1], x[at + 2])
}

/// Relative attitude equations: Q̇_e = ½Q_e⊗ω_e and
/// Jω̇_e = Ξω_e − ω̄_d×Jω̄_d − J R(Q_e) ω̇_d + u.
fn error_rates(j: &Matrix3<f64>, traj: &DesiredTrajectory, t: f64, qe: &Q4, we: &Vec3, u: &Vec3) -> (Q4, Vec3) {
    let wd_bar = rot(qe, &traj.omega_d(t));
    let xi = skew(&(j * (we + wd_bar))) - skew(&wd_bar) * j - j * skew(&wd_bar);
    let rhs = xi * we - wd_bar.cross(&(j * wd_bar)) - j * rot(qe, &traj.omega_d_dot(t)) + u;
    (qmul(qe, &pure(we)) * 0.5, j.try_inverse().unwrap() * rhs)
}

/// u_d = ω̄_d×Jω̄_d + J R(Q_e) ω̇_d.
fn feedforward(j: &Matrix3<f64>, traj: &DesiredTrajectory, t: f64, qe: &Q4) -> Vec3 {
    let wd_bar = rot(qe, &traj.omega_d(t));
    wd_bar.cross(&(j * wd_bar)) + j * rot(qe, &traj.omega_d_dot(t))
}

fn flip(h: f64, scalar: f64, delta: f64) -> Option<f64> {
    (h * scalar <= -delta).then(|| if scalar < 0.0 { -1.0 } else { 1.0 })
}

/// One oracle sample: (Q_e, ω_e, Q̃) at a step boundary, after jumps.
#[derive(Debug, Clone, Copy)]
pub struct OracleSample {
    pub q_e: Q4,
    pub omega_e: Vec3,
    pub q_tilde: Option<Q4>,
    pub b_tilde: Option<Vec3>,
}

/// Full-state loop in error coordinates with the torque evaluated
/// continuously. Returns one sample per step boundary (N+1).
pub fn full_state_oracle(sc: &Scenario) -> Vec<OracleSample> {
    let ControllerSpec::FullState { gains } = sc.controller else {
        panic!("full-state scenario expected")
    };
    let j = *sc.inertia.matrix();
    let traj = sc.trajectory;
    let qe0 = qmul(
        &qconj(&q_arr(sc.trajectory.attitude0.to_array())),
        &q_arr(sc.initial.attitude.to_array()),
    );
    let we0 = sc.initial.omega - rot(&qe0, &traj.omega_d(0.0));
    let mut x = DVector::from_iterator(7, qe0.iter().copied().chain(we0.iter().copied()));
    let mut h = sc.h0.value();
    let dt = sc.sim.dt_s;
    let mut out = Vec::new();
    for k in 0..=sc.sim.steps() {
        let t = k as f64 * dt;
        if let Some(hn) = flip(h, x[0], gains.delta) {
            h = hn;
        }
        out.push(OracleSample {
            q_e: q4(&x, 0),
            omega_e: v3(&x, 4),
            q_tilde: None,
            b_tilde: None,
        });
        if k == sc.sim.steps() {
            break;
        }
        let f = |t: f64, x: &DVector<f64>| {
            let (qe, we) = (q4(x, 0), v3(x, 4));
            let u = feedforward(&j, &traj, t, &qe)
                - kappa1(&qe, h, 1.0 - gains.alpha1) * gains.k1
                - sat(&we, gains.alpha2) * gains.k2;
            let (dq, dw) = error_rates(&j, &traj, t, &qe, &we, &u);
            DVector::from_iterator(7, dq.iter().copied().chain(dw.iter().copied()))
        };
        x = rk4(&f, t, &x, dt);
        normalize_block(&mut x, 0);
    }
    out
}

/// Observer estimation-error system: Q̃̇ = ½Q̃⊗(−b̃ − μ₁κ₁(h̃Q̃, 1−β₁)),
/// ḃ̃ = μ₂κ₁(h̃Q̃, 1−β₂), with the h̃ hysteresis jump.
pub fn observer_error_oracle(sc: &Scenario) -> Vec<OracleSample> {
    let ControllerSpec::BiasedGyro {
        observer,
        h_tilde0,
        q_ei0,
        b_hat0,
        ..
    } = sc.controller
    else {
        panic!("biased-gyro scenario expected")
    };
    let qt0 = qmul(&qconj(&q_arr(q_ei0.to_array())), &q_arr(sc.initial.attitude.to_array()));
    let bt0 = sc.bias0 - b_hat0;
    let mut x = DVector::from_iterator(7, qt0.iter().copied().chain(bt0.iter().copied()));
    let mut ht = h_tilde0.value();
    let dt = sc.sim.dt_s;
    let mut out = Vec::new();
    for k in 0..=sc.sim.steps() {
        if let Some(hn) = flip(ht, x[0], observer.delta) {
            ht = hn;
        }
        out.push(OracleSample {
            q_e: Q4::new(1.0, 0.0, 0.0, 0.0),
            omega_e: Vec3::zeros(),
            q_tilde: Some(q4(&x, 0)),
            b_tilde: Some(v3(&x, 4)),
        });
        if k == sc.sim.steps() {
            break;
        }
        let f = |_t: f64, x: &DVector<f64>| {
            let (qt, bt) = (q4(x, 0), v3(x, 4));
            let drive = -bt - kappa1(&qt, ht, 1.0 - observer.beta1) * observer.mu1;
            let dq = qmul(&qt, &pure(&drive)) * 0.5;
            let db = kappa1(&qt, ht, 1.0 - observer.beta2) * observer.mu2;
            DVector::from_iterator(7, dq.iter().copied().chain(db.iter().copied()))
        };
        x = rk4(&f, k as f64 * dt, &x, dt);
        normalize_block(&mut x, 0);
    }
    out
}

/// Attitude-only loop in error coordinates: (Q_e, ω_e) plant with the
/// output-feedback torque and Q̃̇ = ½Q̃⊗(ω_e − k₃κ₁(h̃Q̃, 1−α₃)), with the
/// joint jump.
pub fn attitude_only_oracle(sc: &Scenario) -> Vec<OracleSample> {
    let ControllerSpec::AttitudeOnly { gains, h_tilde0, q_ed0 } = sc.controller else {
        panic!("attitude-only scenario expected")
    };
    let j = *sc.inertia.matrix();
    let traj = sc.trajectory;
    let qe0 = qmul(
        &qconj(&q_arr(sc.trajectory.attitude0.to_array())),
        &q_arr(sc.initial.attitude.to_array()),
    );
    let we0 = sc.initial.omega - rot(&qe0, &traj.omega_d(0.0));
    let qt0 = qmul(&qconj(&q_arr(q_ed0.to_array())), &qe0);
    let mut x = DVector::from_iterator(
        11,
        qe0.iter()
            .copied()
            .chain(we0.iter().copied())
            .chain(qt0.iter().copied()),
    );
    let (mut h, mut ht) = (sc.h0.value(), h_tilde0.value());
    let dt = sc.sim.dt_s;
    let mut out = Vec::new();
    for k in 0..=sc.sim.steps() {
        let t = k as f64 * dt;
        let jump_e = h * x[0] <= -gains.delta;
        let jump_t = ht * x[7] <= -gains.delta;
        if jump_e || jump_t {
            h = if x[0] < 0.0 { -1.0 } else { 1.0 };
            ht = if x[7] < 0.0 { -1.0 } else { 1.0 };
        }
        out.push(OracleSample {
            q_e: q4(&x, 0),
            omega_e: v3(&x, 4),
            q_tilde: Some(q4(&x, 7)),
            b_tilde: None,
        });
        if k == sc.sim.steps() {
            break;
        }
        let f = |t: f64, x: &DVector<f64>| {
            let (qe, we, qt) = (q4(x, 0), v3(x, 4), q4(x, 7));
            let u = feedforward(&j, &traj, t, &qe)
                - kappa1(&qe, h, 1.0 - gains.alpha1) * gains.k1
                - kappa1(&qt, ht, 1.0 - gains.alpha1) * gains.k2;
            let (dq, dw) = error_rates(&j, &traj, t, &qe, &we, &u);
            let dqt = qmul(&qt, &pure(&(we - kappa1(&qt, ht, 1.0 - gains.alpha3) * gains.k3))) * 0.5;
            DVector::from_iterator(
                11,
                dq.iter().copied().chain(dw.iter().copied()).chain(dqt.iter().copied()),
            )
        };
        x = rk4(&f, t, &x, dt);
        normalize_block(&mut x, 0);
        normalize_block(&mut x, 7);
    }
    out
}

pub fn q_arr(a: [f64; 4]) -> Q4 {
    Q4::new(a[0], a[1], a[2], a[3])
}

/// Largest discrepancy between simulator records and oracle samples over
/// the quantities the oracle provides.
pub fn max_discrepancy(trace: &SimTrace, oracle: &[OracleSample], compare_plant: bool) -> f64 {
    assert_eq!(trace.records.len(), oracle.len());
    let mut worst: f64 = 0.0;
    for (r, o) in trace.records.iter().zip(oracle) {
        if compare_plant {
            worst = worst.max((q_arr(r.q_e) - o.q_e).amax());
            worst = worst.max((Vec3::from(r.omega_e) - o.omega_e).amax());
        }
        if let Some(qt) = o.q_tilde {
            worst = worst.max((q_arr(r.q_tilde.expect("q_tilde column")) - qt).amax());
        }
        if let Some(bt) = o.b_tilde {
            worst = worst.max((Vec3::from(r.bias) - Vec3::from(r.b_hat) - bt).amax());
        }
    }
    worst
}

/// Noise-free variant with the torque evaluated continuously, no actuator
/// limit and the given horizon.
pub fn continuous(mut cfg: ScenarioConfig, t_final: f64) -> ScenarioConfig {
    cfg.sim.torque_hold = TorqueHold::Continuous;
    cfg.sim.t_final_s = t_final;
    cfg.controller.torque_limit_n_m = None;
    cfg
}
