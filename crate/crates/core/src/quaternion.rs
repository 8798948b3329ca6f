//! Quaternion arithmetic and the nonsmooth feedback primitives used by the
//! hybrid controllers.
//!
//! Quaternions are stored scalar-first, `[q0, q1, q2, q3]`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Allowed deviation of a unit quaternion's norm from one.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Below this, `‖q‖` (for κ₀) or the chordal gap `2(1 − q0)` (for κ₁) is
/// treated as zero and the singular branch is taken.
pub const SINGULAR_EPS: f64 = 1e-12;

/// Norms below this cannot be normalized.
pub const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuatError {
    #[error("quaternion norm {norm} is not within {UNIT_NORM_TOL} of one")]
    NotUnit { norm: f64 },
    #[error("quaternion norm {norm} too small to normalize (integrator blowup?)")]
    DegenerateNorm { norm: f64 },
    #[error("quaternion component {value} outside [-1, 1]")]
    Domain { value: f64 },
}

/// General element of ℝ⁴ with quaternion multiplication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub q0: f64,
    pub q: Vec3,
}

impl Quaternion {
    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self {
            q0,
            q: Vector3::new(q1, q2, q3),
        }
    }

    pub fn from_parts(q0: f64, q: Vec3) -> Self {
        Self { q0, q }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    /// Pure quaternion `[0, vᵀ]ᵀ`.
    pub fn pure(v: Vec3) -> Self {
        Self { q0: 0.0, q: v }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q0, self.q.x, self.q.y, self.q.z]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.q0 * other.q0 + self.q.dot(&other.q)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self {
            q0: self.q0,
            q: -self.q,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q0.is_finite() && self.q.iter().all(|c| c.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.q0 - other.q0).abs().max((self.q - other.q).amax())
    }
}

/// Hamilton product `Q ⊗ P = [q0 p0 − qᵀp, q0 p + p0 q + q × p]`.
pub fn quat_mul(a: &Quaternion, b: &Quaternion) -> Quaternion {
    Quaternion {
        q0: a.q0 * b.q0 - a.q.dot(&b.q),
        q: b.q * a.q0 + a.q * b.q0 + a.q.cross(&b.q),
    }
}

pub fn conjugate(q: &Quaternion) -> Quaternion {
    q.conjugate()
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        quat_mul(&self, &rhs)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        Quaternion {
            q0: self.q0 * s,
            q: self.q * s,
        }
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion {
            q0: self.q0 + rhs.q0,
            q: self.q + rhs.q,
        }
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, rhs: Quaternion) {
        self.q0 += rhs.q0;
        self.q += rhs.q;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion {
            q0: self.q0 - rhs.q0,
            q: self.q - rhs.q,
        }
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion {
            q0: -self.q0,
            q: -self.q,
        }
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}, {:.6}, {:.6}, {:.6}]", self.q0, self.q.x, self.q.y, self.q.z)
    }
}

/// Quaternion on 𝕊³. The norm is within [`UNIT_NORM_TOL`] of one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    /// Wraps `q` if its norm is within tolerance of one.
    pub fn new(q: Quaternion) -> Result<Self, QuatError> {
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(QuatError::NotUnit { norm });
        }
        Ok(Self(q))
    }

    /// Caller guarantees `q` is unit to rounding.
    pub fn new_unchecked(q: Quaternion) -> Self {
        Self(q)
    }

    pub fn identity() -> Self {
        Self(Quaternion::identity())
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self, QuatError> {
        Self::new(Quaternion::from_array(a))
    }

    /// Rotation by `angle` (rad) about the unit `axis`: `q0 = cos(φ/2)`, `q = sin(φ/2) η`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n < MIN_NORM {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self(Quaternion::from_parts(c, axis * (s / n)))
    }

    /// Unit quaternion with vector part `q` and scalar part `sign·√(1 − ‖q‖²)`.
    /// `‖q‖` must not exceed one.
    pub fn from_vector_part(q: Vec3, sign: f64) -> Result<Self, QuatError> {
        let n2 = q.norm_squared();
        if n2 > 1.0 + UNIT_NORM_TOL {
            return Err(QuatError::Domain { value: n2.sqrt() });
        }
        let q0 = (1.0 - n2).max(0.0).sqrt();
        Ok(Self(Quaternion::from_parts(sign.signum() * q0, q)))
    }

    pub fn q0(&self) -> f64 {
        self.0.q0
    }

    pub fn vector(&self) -> Vec3 {
        self.0.q
    }

    pub fn as_quaternion(&self) -> &Quaternion {
        &self.0
    }

    pub fn into_inner(self) -> Quaternion {
        self.0
    }

    pub fn to_array(&self) -> [f64; 4] {
        self.0.to_array()
    }

    pub fn conjugate(&self) -> Self {
        Self(self.0.conjugate())
    }

    /// `hQ` for a sign `h`.
    pub fn signed(&self, h: f64) -> Self {
        if h < 0.0 {
            Self(-self.0)
        } else {
            *self
        }
    }

    pub fn mul(&self, other: &UnitQuaternion) -> UnitQuaternion {
        Self(quat_mul(&self.0, &other.0))
    }

    /// Rotation matrix `R(Q)` from the reference frame to the frame `Q` describes.
    pub fn rotation_matrix(&self) -> Mat3 {
        rotation_matrix(self)
    }

    /// Eigenaxis rotation angle φ ∈ [0, 2π].
    pub fn angle(&self) -> f64 {
        2.0 * self.0.q.norm().atan2(self.0.q0)
    }

    /// Chordal gap `2(1 − h q0)`, evaluated without cancellation near `h q0 = 1`.
    pub fn chordal_gap(&self, h: f64) -> f64 {
        let s = h * self.0.q0;
        let n2 = self.0.q.norm_squared();
        if s > 0.0 {
            2.0 * n2 / (1.0 + s)
        } else {
            2.0 * (1.0 - s)
        }
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion(quat_mul(&self.0, &rhs.0))
    }
}

impl Neg for UnitQuaternion {
    type Output = UnitQuaternion;
    fn neg(self) -> UnitQuaternion {
        UnitQuaternion(-self.0)
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `Q / ‖Q‖`.
pub fn normalize(q: &Quaternion) -> Result<UnitQuaternion, QuatError> {
    let norm = q.norm();
    if !norm.is_finite() || norm <= MIN_NORM {
        return Err(QuatError::DegenerateNorm { norm });
    }
    Ok(UnitQuaternion(*q * (1.0 / norm)))
}

/// Skew-symmetric matrix with `skew(x) y = x × y`.
pub fn skew(v: &Vec3) -> Mat3 {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `R(Q) = (q0² − qᵀq) I₃ + 2 q qᵀ − 2 q0 q×`.
pub fn rotation_matrix(q: &UnitQuaternion) -> Mat3 {
    let q0 = q.q0();
    let v = q.vector();
    Mat3::identity() * (q0 * q0 - v.norm_squared()) + v * v.transpose() * 2.0 - skew(&v) * (2.0 * q0)
}

/// `E(q) = q× + q0 I₃`.
pub fn e_matrix(q: &Vec3, q0: f64) -> Mat3 {
    skew(q) + Mat3::identity() * q0
}

/// `sgnᵅ(x) = sgn(x) |x|ᵅ`.
#[inline]
pub fn sgn_pow(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(alpha)
    }
}

/// `satᵅ(x) = sgn(x) min{|x|ᵅ, 1}`.
#[inline]
pub fn sat_pow(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(alpha).min(1.0)
    }
}

pub fn sgn_pow_vec(v: &Vec3, alpha: f64) -> Vec3 {
    v.map(|x| sgn_pow(x, alpha))
}

pub fn sat_pow_vec(v: &Vec3, alpha: f64) -> Vec3 {
    v.map(|x| sat_pow(x, alpha))
}

/// κ₀(Q, α) = q / ‖q‖ᵅ, zero at ‖q‖ = 0.
pub fn kappa0(q: &UnitQuaternion, alpha: f64) -> Vec3 {
    kappa0_vec(&q.vector(), alpha)
}

/// κ₀ depends only on the vector part. Its norm is ‖v‖^(1−α), so only the
/// exact origin needs special handling.
pub fn kappa0_vec(v: &Vec3, alpha: f64) -> Vec3 {
    let n = v.norm();
    if n == 0.0 {
        Vec3::zeros()
    } else {
        v / n.powf(alpha)
    }
}

/// κ₁(Q, α) = q / (√(2(1 − q0)))ᵅ, zero at q0 = 1.
pub fn kappa1(q: &UnitQuaternion, alpha: f64) -> Vec3 {
    let gap = q.chordal_gap(1.0);
    if gap < SINGULAR_EPS * SINGULAR_EPS {
        Vec3::zeros()
    } else {
        q.vector() / gap.powf(0.5 * alpha)
    }
}

/// κ̄ = κ₁ − κ₀.
pub fn kappa_bar(q: &UnitQuaternion, alpha: f64) -> Vec3 {
    kappa1(q, alpha) - kappa0(q, alpha)
}

fn check_unit_interval(x: f64) -> Result<f64, QuatError> {
    if !x.is_finite() || x.abs() > 1.0 + UNIT_NORM_TOL {
        Err(QuatError::Domain { value: x })
    } else {
        Ok(x.clamp(-1.0, 1.0))
    }
}

/// φ(x, α) = (√(2(1 − x)))ᵅ for |x| ≤ 1.
pub fn phi(x: f64, alpha: f64) -> Result<f64, QuatError> {
    let x = check_unit_interval(x)?;
    Ok((2.0 * (1.0 - x)).powf(0.5 * alpha))
}

/// ρ(x, α) = φ(|x|, α) − φ(x, α).
pub fn rho(x: f64, alpha: f64) -> Result<f64, QuatError> {
    let x = check_unit_interval(x)?;
    Ok(phi(x.abs(), alpha)? - phi(x, alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit(a: [f64; 4]) -> UnitQuaternion {
        normalize(&Quaternion::from_array(a)).unwrap()
    }

    prop_compose! {
        fn arb_unit()(a in prop::array::uniform4(-1.0f64..1.0)) -> UnitQuaternion {
            let q = Quaternion::from_array(a);
            if q.norm() < 1e-3 { UnitQuaternion::identity() } else { normalize(&q).unwrap() }
        }
    }

    prop_compose! {
        fn arb_vec()(a in prop::array::uniform3(-5.0f64..5.0)) -> Vec3 {
            Vec3::new(a[0], a[1], a[2])
        }
    }

    #[test]
    fn product_examples() {
        let q = Quaternion::new(0.3, -0.2, 0.9, 0.1);
        assert_eq!(Quaternion::identity() * q, q);
        let i = Quaternion::new(0.0, 1.0, 0.0, 0.0);
        let j = Quaternion::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(i * j, Quaternion::new(0.0, 0.0, 0.0, 1.0));
        let u = unit([0.3, -0.2, 0.9, 0.1]);
        let p = UnitQuaternion::mul(&u, &u.conjugate());
        assert!(p.as_quaternion().max_abs_diff(&Quaternion::identity()) < 1e-15);
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(conjugate(&Quaternion::identity()), Quaternion::identity());
        assert_eq!(
            conjugate(&Quaternion::new(0.0, 1.0, 0.0, 0.0)),
            Quaternion::new(0.0, -1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn rotation_matrix_examples() {
        assert_eq!(rotation_matrix(&UnitQuaternion::identity()), Mat3::identity());
        let z180 = UnitQuaternion::from_array([0.0, 0.0, 0.0, 1.0]).unwrap();
        let r = rotation_matrix(&z180);
        assert!((r - Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0))).amax() < 1e-15);
    }

    #[test]
    fn e_matrix_examples() {
        assert_eq!(e_matrix(&Vec3::zeros(), 1.0), Mat3::identity());
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(e_matrix(&x, 0.0), skew(&x));
    }

    #[test]
    fn scalar_power_examples() {
        assert_eq!(sgn_pow(-4.0, 0.5), -2.0);
        assert_eq!(sgn_pow(0.0, 0.7), 0.0);
        assert_eq!(sat_pow(9.0, 0.5), 1.0);
        assert_eq!(sat_pow(-0.25, 0.5), -0.5);
        assert_eq!(sat_pow(3.0, 1.0), 1.0);
        assert_eq!(sat_pow(-0.4, 1.0), -0.4);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa0(&UnitQuaternion::identity(), 0.4), Vec3::zeros());
        assert_eq!(kappa1(&UnitQuaternion::identity(), 0.4), Vec3::zeros());
        assert_eq!(kappa_bar(&UnitQuaternion::identity(), 0.4), Vec3::zeros());

        let x = UnitQuaternion::from_array([0.0, 1.0, 0.0, 0.0]).unwrap();
        for alpha in [0.0, 0.3, 0.9] {
            assert_relative_eq!(kappa0(&x, alpha), Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        }

        let q = UnitQuaternion::from_array([0.91f64.sqrt(), 0.3, 0.0, 0.0]).unwrap();
        let k0 = kappa0(&q, 0.5);
        assert_relative_eq!(k0.x, 0.3 / 0.3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(k0.x, 0.5477225575051661, epsilon = 1e-12);

        let k1 = kappa1(&x, 0.5);
        assert_relative_eq!(k1.x, 2f64.powf(-0.25), epsilon = 1e-15);
        assert_relative_eq!(k1.x, 0.8408964152537145, epsilon = 1e-12);
    }

    #[test]
    fn kappa0_norm_identity() {
        let q = unit([0.2, 0.5, -0.4, 0.3]);
        let n = q.vector().norm();
        assert_relative_eq!(kappa0(&q, 0.35).norm(), n.powf(0.65), epsilon = 1e-14);
    }

    #[test]
    fn kappa_bar_asymptotics() {
        // κ̄ ≈ −α‖q‖²κ₀/8 for small ‖q‖, q0 > 0.
        for alpha in [0.2, 0.5, 0.9] {
            let q = UnitQuaternion::from_vector_part(Vec3::new(1e-3, 0.0, 0.0), 1.0).unwrap();
            let ratio = kappa_bar(&q, alpha).x / (1e-6 * kappa0(&q, alpha).x);
            assert!((ratio + alpha / 8.0).abs() <= 1e-3 * alpha / 8.0, "{ratio}");
        }
    }

    #[test]
    fn phi_rho_examples() {
        assert_eq!(phi(1.0, 0.7).unwrap(), 0.0);
        assert_eq!(rho(0.5, 1.6).unwrap(), 0.0);
        let (k1, alpha1, delta) = (1.1, 0.6, 0.3);
        let sigma1 = -2.0 * k1 * rho(-delta, 1.0 + alpha1).unwrap() / (1.0 + alpha1);
        // ρ(−0.3, 1.6) = 1.4^0.8 − 2.6^0.8
        let expected = -2.0 * k1 * (1.4f64.powf(0.8) - 2.6f64.powf(0.8)) / 1.6;
        assert_relative_eq!(sigma1, expected, epsilon = 1e-14);
        assert!(sigma1 > 0.0);
        assert!(matches!(phi(1.1, 0.5), Err(QuatError::Domain { .. })));
        assert!(rho(-1.0 - 1e-10, 0.5).is_ok());
    }

    #[test]
    fn rho_monotone_on_negative_half() {
        let mut prev = rho(-1.0, 1.6).unwrap();
        for i in 1..=1000 {
            let x = -1.0 + i as f64 / 1000.0;
            let r = rho(x, 1.6).unwrap();
            assert!(r >= prev - 1e-15);
            assert!(r <= 0.0);
            prev = r;
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize(&Quaternion::new(2.0, 0.0, 0.0, 0.0)).unwrap(),
            UnitQuaternion::identity()
        );
        let u = Quaternion::new(0.5, 0.5, 0.5, 0.5);
        assert!(normalize(&u).unwrap().as_quaternion().max_abs_diff(&u) <= 1e-15);
        assert_eq!(
            normalize(&Quaternion::new(1.0, 1.0, 1.0, 1.0)).unwrap().to_array(),
            [0.5, 0.5, 0.5, 0.5]
        );
        assert!(matches!(
            normalize(&Quaternion::zero()),
            Err(QuatError::DegenerateNorm { .. })
        ));
        assert!(UnitQuaternion::new(Quaternion::new(1.0, 1e-4, 0.0, 0.0)).is_err());
    }

    #[test]
    fn kappa_continuity_along_sequence() {
        let axis = Vec3::new(0.3, -0.5, 0.8).normalize();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for i in 0..40 {
            let s = 0.9 * 0.7f64.powi(i);
            let q = UnitQuaternion::from_vector_part(axis * s, 1.0).unwrap();
            let n = (kappa0(&q, 0.4).norm(), kappa1(&q, 0.4).norm());
            assert!(n.0 < prev.0 && n.1 < prev.1);
            prev = n;
        }
        assert!(prev.0 < 1e-3 && prev.1 < 1e-3);
    }

    proptest! {
        #[test]
        fn unit_closure(a in arb_unit(), b in arb_unit()) {
            prop_assert!(((a * b).as_quaternion().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn conjugate_antihomomorphism(a in arb_unit(), b in arb_unit()) {
            let lhs = (a * b).conjugate();
            let rhs = b.conjugate() * a.conjugate();
            prop_assert!(lhs.as_quaternion().max_abs_diff(rhs.as_quaternion()) < 1e-12);
        }

        #[test]
        fn conjugate_involution(a in prop::array::uniform4(-3.0f64..3.0)) {
            let q = Quaternion::from_array(a);
            prop_assert_eq!(q.conjugate().conjugate(), q);
        }

        #[test]
        fn rotation_consistency(q in arb_unit(), x in arb_vec()) {
            let r = rotation_matrix(&q);
            prop_assert!((r.transpose() * r - Mat3::identity()).amax() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            let via_product = quat_mul(
                &quat_mul(&q.conjugate().into_inner(), &Quaternion::pure(x)),
                q.as_quaternion(),
            );
            prop_assert!((r * x - via_product.q).amax() < 1e-9);
        }

        #[test]
        fn skew_antisymmetric(x in arb_vec(), y in arb_vec()) {
            let s = skew(&x);
            prop_assert!((s + s.transpose()).amax() < 1e-12);
            prop_assert!((s * y - x.cross(&y)).amax() < 1e-12);
        }

        #[test]
        fn e_matrix_fixes_vector_part(x in arb_vec(), q0 in -1.0f64..1.0) {
            prop_assert!((e_matrix(&x, q0) * x - x * q0).amax() < 1e-12);
        }

        #[test]
        fn power_functions_odd(x in -10.0f64..10.0, alpha in 0.0f64..2.0) {
            prop_assert_eq!(sgn_pow(-x, alpha), -sgn_pow(x, alpha));
            prop_assert_eq!(sat_pow(-x, alpha), -sat_pow(x, alpha));
            prop_assert!(sat_pow(x, alpha).abs() <= 1.0);
            if x.abs() <= 1.0 {
                prop_assert_eq!(sat_pow(x, alpha), sgn_pow(x, alpha));
            }
            prop_assert_eq!(sgn_pow(x, 1.0), x);
        }

        #[test]
        fn kappa1_bounded(q in arb_unit(), alpha in 0.0f64..1.0) {
            prop_assert!(kappa1(&q, alpha).norm() <= 1.0 + 1e-15);
        }
    }
}
