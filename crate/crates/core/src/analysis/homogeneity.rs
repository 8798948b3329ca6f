//! Numerical homogeneity of the reduced closed-loop fields near the target
//! set, and the vanishing of the neglected perturbation terms under
//! dilation.
//!
//! States are stacks of 3-vector blocks (vector parts of error quaternions,
//! rate or bias errors). Scalar parts are recovered on the hemisphere that
//! contains the target, q0 = h√(1 − ‖q‖²).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::LogicVar;
use crate::par;
use crate::quaternion::{e_matrix, kappa0_vec, kappa1, kappa_bar, sgn_pow_vec, Quaternion, UnitQuaternion, Vec3};
use crate::rigid_body::{xi_matrix, DesiredTrajectory, InertiaMatrix};

/// Δ_ε^r with one weight per 3-vector block, and the homogeneity degree k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationWeights {
    pub r: Vec<f64>,
    pub k: f64,
}

impl DilationWeights {
    pub fn is_valid(&self) -> bool {
        self.k < 0.0 && self.r.iter().all(|&r| r > 0.0)
    }

    pub fn dilate(&self, x: &[Vec3], eps: f64) -> Vec<Vec3> {
        x.iter().zip(&self.r).map(|(v, r)| v * eps.powf(*r)).collect()
    }
}

/// The three reduced closed-loop systems (perturbation terms removed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReducedSystem {
    /// x = (q_e, ω_e).
    FullState {
        k1: f64,
        k2: f64,
        alpha1: f64,
        h: LogicVar,
        inertia: InertiaMatrix,
    },
    /// x = (q̃, b̃).
    Observer {
        mu1: f64,
        mu2: f64,
        beta1: f64,
        h_tilde: LogicVar,
    },
    /// x = (q̃, q_e, ω_e).
    AttitudeOnly {
        k1: f64,
        k2: f64,
        k3: f64,
        alpha3: f64,
        h: LogicVar,
        h_tilde: LogicVar,
        inertia: InertiaMatrix,
    },
}

/// Rebuilds the unit quaternion with vector part `q` on the `h` hemisphere.
fn hemisphere(q: &Vec3, h: LogicVar) -> UnitQuaternion {
    let q0 = (1.0 - q.norm_squared()).max(0.0).sqrt();
    UnitQuaternion::new_unchecked(Quaternion::from_parts(h.value() * q0, *q))
}

impl ReducedSystem {
    pub fn blocks(&self) -> usize {
        match self {
            ReducedSystem::FullState { .. } | ReducedSystem::Observer { .. } => 2,
            ReducedSystem::AttitudeOnly { .. } => 3,
        }
    }

    /// Weights under which the reduced field is homogeneous of degree `k`.
    ///
    /// Full state: r = (−k(2−α₂)/(1−α₂), −k/(1−α₂)).
    /// Observer: r = (−k/(1−β₁), −β₁k/(1−β₁)).
    /// Attitude only: r = (−k/(1−α₃), −k/(1−α₃), −α₃k/(1−α₃)).
    pub fn weights(&self, k: f64) -> DilationWeights {
        let r = match *self {
            ReducedSystem::FullState { alpha1, .. } => {
                let a2 = 2.0 * alpha1 / (1.0 + alpha1);
                vec![-k * (2.0 - a2) / (1.0 - a2), -k / (1.0 - a2)]
            }
            ReducedSystem::Observer { beta1, .. } => {
                vec![-k / (1.0 - beta1), -beta1 * k / (1.0 - beta1)]
            }
            ReducedSystem::AttitudeOnly { alpha3, .. } => {
                let r = -k / (1.0 - alpha3);
                vec![r, r, alpha3 * r]
            }
        };
        DilationWeights { r, k }
    }

    /// Weights exactly as printed alongside the stability proofs. They
    /// coincide with [`Self::weights`] only for the observer.
    pub fn printed_weights(&self, k: f64) -> DilationWeights {
        let r = match *self {
            ReducedSystem::FullState { alpha1, .. } => {
                let a2 = 2.0 * alpha1 / (1.0 + alpha1);
                vec![-2.0 * k / (1.0 - a2), -(1.0 + a2) * k / (1.0 - a2)]
            }
            ReducedSystem::Observer { .. } => return self.weights(k),
            ReducedSystem::AttitudeOnly { alpha3, .. } => {
                let r = -k / (1.0 - alpha3);
                vec![alpha3 * r, r, r]
            }
        };
        DilationWeights { r, k }
    }

    /// Reduced field f(x).
    pub fn eval(&self, x: &[Vec3]) -> Vec<Vec3> {
        match *self {
            ReducedSystem::FullState {
                k1,
                k2,
                alpha1,
                h,
                inertia,
            } => {
                let a2 = 2.0 * alpha1 / (1.0 + alpha1);
                let (q, w) = (x[0], x[1]);
                let torque = kappa0_vec(&q, 1.0 - alpha1) * (k1 * h.value()) + sgn_pow_vec(&w, a2) * k2;
                vec![w * (0.5 * h.value()), -(inertia.inverse() * torque)]
            }
            ReducedSystem::Observer {
                mu1,
                mu2,
                beta1,
                h_tilde,
            } => {
                let beta2 = 2.0 * beta1 - 1.0;
                let ht = h_tilde.value();
                let (q, b) = (x[0], x[1]);
                vec![
                    -b * (0.5 * ht) - kappa0_vec(&q, 1.0 - beta1) * (0.5 * mu1),
                    kappa0_vec(&q, 1.0 - beta2) * (mu2 * ht),
                ]
            }
            ReducedSystem::AttitudeOnly {
                k1,
                k2,
                k3,
                alpha3,
                h,
                h_tilde,
                inertia,
            } => {
                let alpha1 = 2.0 * alpha3 - 1.0;
                let (qt, qe, w) = (x[0], x[1], x[2]);
                let torque = kappa0_vec(&qe, 1.0 - alpha1) * (k1 * h.value())
                    + kappa0_vec(&qt, 1.0 - alpha1) * (k2 * h_tilde.value());
                vec![
                    w * (0.5 * h_tilde.value()) - kappa0_vec(&qt, 1.0 - alpha3) * (0.5 * k3),
                    w * (0.5 * h.value()),
                    -(inertia.inverse() * torque),
                ]
            }
        }
    }

    /// Perturbation terms f̂(x, t) dropped from the exact flow near the
    /// target. `f + f̂` is the exact closed-loop flow of the vector parts.
    pub fn perturbation(&self, x: &[Vec3], t: f64, traj: &DesiredTrajectory) -> Vec<Vec3> {
        match *self {
            ReducedSystem::FullState {
                k1, alpha1, h, inertia, ..
            } => {
                let (q, w) = (x[0], x[1]);
                let qe = hemisphere(&q, h);
                let f1 = (e_matrix(&q, qe.q0()) - nalgebra::Matrix3::identity() * h.value()) * w * 0.5;
                let wd_body = qe.rotation_matrix() * traj.omega_d(t);
                let f2 = inertia.inverse()
                    * (xi_matrix(&inertia, &w, &wd_body) * w - kappa_bar(&qe.signed(h.value()), 1.0 - alpha1) * k1);
                vec![f1, f2]
            }
            ReducedSystem::Observer {
                mu1,
                mu2,
                beta1,
                h_tilde,
            } => {
                let beta2 = 2.0 * beta1 - 1.0;
                let ht = h_tilde.value();
                let (q, b) = (x[0], x[1]);
                let qt = hemisphere(&q, h_tilde);
                let s = qt.signed(ht);
                let f1 = -(e_matrix(&q, qt.q0()) - nalgebra::Matrix3::identity() * ht) * b * 0.5
                    - (kappa1(&s, 1.0 - beta1) * (qt.q0() - ht) + kappa_bar(&s, 1.0 - beta1) * ht) * (0.5 * mu1);
                let f2 = kappa_bar(&s, 1.0 - beta2) * mu2;
                vec![f1, f2]
            }
            ReducedSystem::AttitudeOnly {
                k1,
                k2,
                k3,
                alpha3,
                h,
                h_tilde,
                inertia,
            } => {
                let alpha1 = 2.0 * alpha3 - 1.0;
                let ht = h_tilde.value();
                let (qtv, qev, w) = (x[0], x[1], x[2]);
                let qt = hemisphere(&qtv, h_tilde);
                let qe = hemisphere(&qev, h);
                let st = qt.signed(ht);
                let eye = nalgebra::Matrix3::identity();
                let f1 = (e_matrix(&qtv, qt.q0()) - eye * ht) * w * 0.5
                    - kappa1(&st, 1.0 - alpha3) * (0.5 * k3 * (qt.q0() - ht))
                    - kappa_bar(&st, 1.0 - alpha3) * (0.5 * k3 * ht);
                let f2 = (e_matrix(&qev, qe.q0()) - eye * h.value()) * w * 0.5;
                let wd_body = qe.rotation_matrix() * traj.omega_d(t);
                let f3 = inertia.inverse()
                    * (xi_matrix(&inertia, &w, &wd_body) * w
                        - kappa_bar(&qe.signed(h.value()), 1.0 - alpha1) * k1
                        - kappa_bar(&st, 1.0 - alpha1) * k2);
                vec![f1, f2, f3]
            }
        }
    }
}

/// Uniform point on the unit sphere of ℝ^(3·blocks).
fn sphere_sample<R: Rng>(blocks: usize, rng: &mut R) -> Vec<Vec3> {
    loop {
        let v: Vec<Vec3> = (0..blocks)
            .map(|_| {
                Vec3::new(
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                )
            })
            .collect();
        let n = v.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|b| b / n).collect();
        }
    }
}

/// Relative deviation of one sample (x, ε) from fᵢ(Δx) = ε^(rᵢ+k) fᵢ(x),
/// maximised over blocks. Each block is compared in norm, since single
/// components can nearly cancel and amplify rounding.
pub fn homogeneity_deviation(sys: &ReducedSystem, w: &DilationWeights, x: &[Vec3], eps: f64) -> f64 {
    let fx = sys.eval(x);
    let fd = sys.eval(&w.dilate(x, eps));
    let mut worst: f64 = 0.0;
    for ((a, b), r) in fd.iter().zip(&fx).zip(&w.r) {
        let expected = b * eps.powf(r + w.k);
        worst = worst.max((a - expected).norm() / (expected.norm() + 1e-300));
    }
    worst
}

/// Max relative deviation over `samples` points of the unit sphere with ε
/// drawn log-uniformly from [`eps_range.0`, `eps_range.1`]. Samples are
/// evaluated in parallel chunks with per-chunk seeds, so the result does
/// not depend on the thread count.
pub fn homogeneity_check(
    sys: &ReducedSystem,
    w: &DilationWeights,
    samples: usize,
    eps_range: (f64, f64),
    seed: u64,
) -> f64 {
    const CHUNK: usize = 256;
    let chunks: Vec<usize> = (0..samples.div_ceil(CHUNK)).collect();
    let (lo, hi) = (eps_range.0.ln(), eps_range.1.ln());
    let maxima = par::map(&chunks, |&c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let n = CHUNK.min(samples - c * CHUNK);
        (0..n)
            .map(|_| {
                let x = sphere_sample(sys.blocks(), &mut rng);
                let eps = (lo + (hi - lo) * rng.random::<f64>()).exp();
                homogeneity_deviation(sys, w, &x, eps)
            })
            .fold(0.0, f64::max)
    });
    maxima.into_iter().fold(0.0, f64::max)
}

/// Ratios ‖f̂ᵢ(Δ_ε x, t)‖ / ε^(rᵢ+k) for one perturbation block across the ε
/// sequence, maximised over samples and the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTable {
    pub block: usize,
    pub eps: Vec<f64>,
    /// Largest ratio over samples for each ε.
    pub max_ratio: Vec<f64>,
    /// Samples whose ratio failed to decrease strictly from one ε to the next.
    pub non_monotone_samples: usize,
    pub samples: usize,
}

impl PerturbationTable {
    pub fn monotone(&self) -> bool {
        self.non_monotone_samples == 0
    }

    /// Smallest per-decade reduction factor of the max ratio.
    pub fn min_decade_factor(&self) -> f64 {
        self.max_ratio
            .windows(2)
            .map(|w| w[0] / w[1])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Lemma-style vanishing check of every perturbation block of `sys`.
pub fn perturbation_vanishing_check(
    sys: &ReducedSystem,
    w: &DilationWeights,
    traj: &DesiredTrajectory,
    samples: usize,
    eps_list: &[f64],
    t_grid: &[f64],
    seed: u64,
) -> Vec<PerturbationTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<Vec3>> = (0..samples).map(|_| sphere_sample(sys.blocks(), &mut rng)).collect();
    // ratios[sample][eps][block]
    let ratios: Vec<Vec<Vec<f64>>> = par::map(&xs, |x| {
        eps_list
            .iter()
            .map(|&eps| {
                let xd = w.dilate(x, eps);
                let mut best = vec![0.0f64; sys.blocks()];
                for &t in t_grid {
                    for (i, f) in sys.perturbation(&xd, t, traj).iter().enumerate() {
                        best[i] = best[i].max(f.norm() / eps.powf(w.r[i] + w.k));
                    }
                }
                best
            })
            .collect()
    });
    (0..sys.blocks())
        .map(|b| {
            let max_ratio = (0..eps_list.len())
                .map(|e| ratios.iter().map(|s| s[e][b]).fold(0.0, f64::max))
                .collect();
            let non_monotone_samples = ratios
                .iter()
                .filter(|s| {
                    s.windows(2)
                        .any(|p| !(p[1][b] < p[0][b] || p[0][b] == 0.0 && p[1][b] == 0.0))
                })
                .count();
            PerturbationTable {
                block: b,
                eps: eps_list.to_vec(),
                max_ratio,
                non_monotone_samples,
                samples,
            }
        })
        .collect()
}
