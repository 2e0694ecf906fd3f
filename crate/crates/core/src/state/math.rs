use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::StateError;

/// Tolerance on `|‖q‖ - 1|` accepted from callers before renormalizing.
pub const UNIT_INPUT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Component-wise product.
    #[inline]
    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    /// Component-wise quotient.
    #[inline]
    pub fn div_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x / o.x, self.y / o.y, self.z / o.z)
    }

    /// Clamps each component to `[-limit, limit]` of the matching component.
    #[inline]
    pub fn clamp_abs(self, limit: Vec3) -> Vec3 {
        Vec3::new(
            self.x.clamp(-limit.x, limit.x),
            self.y.clamp(-limit.y, limit.y),
            self.z.clamp(-limit.z, limit.z),
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min_component(self) -> f64 {
        self.x.min(self.y).min(self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A general (not necessarily unit) quaternion, scalar first.
///
/// Used for quaternion derivatives and intermediate integration stages.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    /// The pure quaternion `[0, v]`.
    pub const fn pure(v: Vec3) -> Self {
        Quat::new(0.0, v.x, v.y, v.z)
    }

    pub fn vector(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Hamilton product `self ∘ o`.
    #[inline]
    pub fn hamilton(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    #[inline]
    pub fn scale(self, s: f64) -> Quat {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn plus(self, o: Quat) -> Quat {
        Quat::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn conj(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Unit quaternion, Hamilton convention, scalar first, body-to-inertial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat(Quat);

impl Default for UnitQuat {
    fn default() -> Self {
        UnitQuat::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat(Quat::new(1.0, 0.0, 0.0, 0.0));

    /// Normalizes `q` and wraps it. Fails on non-finite or zero input.
    pub fn normalize(q: Quat) -> Result<UnitQuat, StateError> {
        if !q.is_finite() {
            return Err(StateError::NonFinite("quaternion"));
        }
        let n = q.norm();
        if n < 1e-12 {
            return Err(StateError::ZeroQuaternion);
        }
        Ok(UnitQuat(q.scale(1.0 / n)))
    }

    /// Accepts `q` only if it is finite and unit within [`UNIT_INPUT_TOL`],
    /// then renormalizes it.
    pub fn from_unit(q: Quat) -> Result<UnitQuat, StateError> {
        if !q.is_finite() {
            return Err(StateError::NonFinite("quaternion"));
        }
        let n = q.norm();
        if (n - 1.0).abs() > UNIT_INPUT_TOL {
            return Err(StateError::NotUnit { norm: n });
        }
        Ok(UnitQuat(q.scale(1.0 / n)))
    }

    /// Normalizes a quaternion produced by finite arithmetic on unit
    /// quaternions. Callers must guarantee a finite, non-zero input.
    #[inline]
    pub(crate) fn renormalize_unchecked(q: Quat) -> UnitQuat {
        let n = q.norm();
        UnitQuat(q.scale(1.0 / n))
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> UnitQuat {
        let n = axis.norm();
        if n < 1e-15 || angle == 0.0 {
            return UnitQuat::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        UnitQuat::renormalize_unchecked(Quat::new(c, a.x * s, a.y * s, a.z * s))
    }

    /// Pure rotation about inertial +z.
    pub fn from_yaw(yaw: f64) -> UnitQuat {
        let (s, c) = (0.5 * yaw).sin_cos();
        UnitQuat(Quat::new(c, 0.0, 0.0, s))
    }

    /// Heading of the body x axis projected on the inertial XY plane.
    pub fn yaw(self) -> f64 {
        let q = self.0;
        (2.0 * (q.w * q.z + q.x * q.y)).atan2(1.0 - 2.0 * (q.y * q.y + q.z * q.z))
    }

    pub fn quat(self) -> Quat {
        self.0
    }

    pub fn w(self) -> f64 {
        self.0.w
    }
    pub fn x(self) -> f64 {
        self.0.x
    }
    pub fn y(self) -> f64 {
        self.0.y
    }
    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn to_array(self) -> [f64; 4] {
        self.0.to_array()
    }

    pub fn conj(self) -> UnitQuat {
        UnitQuat(self.0.conj())
    }

    /// Representative with `w >= 0`.
    pub fn canonical(self) -> UnitQuat {
        if self.0.w < 0.0 {
            UnitQuat(self.0.scale(-1.0))
        } else {
            self
        }
    }

    /// Rotates a body-frame vector into the inertial frame.
    #[inline]
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let q = self.0;
        let u = Vec3::new(q.x, q.y, q.z);
        let t = u.cross(v) * 2.0;
        v + t * q.w + u.cross(t)
    }

    /// Rotation matrix, row-major.
    pub fn rotation_matrix(self) -> [[f64; 3]; 3] {
        let Quat { w, x, y, z } = self.0;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Builds a unit quaternion from a proper rotation matrix (row-major).
    pub fn from_rotation_matrix(m: [[f64; 3]; 3]) -> UnitQuat {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat::new(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat::new(
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        UnitQuat::renormalize_unchecked(q)
    }

    /// Rotation vector (axis times angle) of the shortest rotation equal to `self`.
    pub fn to_rotation_vector(self) -> Vec3 {
        let q = self.canonical().0;
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            // small-angle limit of 2·atan2(s, w)/s
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;
    #[inline]
    fn mul(self, o: UnitQuat) -> UnitQuat {
        UnitQuat::renormalize_unchecked(self.0.hamilton(o.0))
    }
}

impl TryFrom<[f64; 4]> for UnitQuat {
    type Error = StateError;
    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        UnitQuat::from_unit(Quat::new(a[0], a[1], a[2], a[3]))
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.to_array()
    }
}

/// Hamilton product `a ∘ b` of two caller-supplied unit quaternions, renormalized.
pub fn quat_mul(a: Quat, b: Quat) -> Result<UnitQuat, StateError> {
    let a = UnitQuat::from_unit(a)?;
    let b = UnitQuat::from_unit(b)?;
    Ok(a * b)
}

/// `R(q)·v`: a body-frame vector expressed in the inertial frame.
pub fn quat_rotate(q: UnitQuat, v: Vec3) -> Result<Vec3, StateError> {
    if !v.is_finite() {
        return Err(StateError::NonFinite("vector"));
    }
    Ok(q.rotate(v))
}
