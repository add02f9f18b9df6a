use serde::{Deserialize, Serialize};

use super::vec::Vec3;
use crate::scalar::Real;

/// Squared-angle threshold below which exp/log switch to Taylor series.
/// At 1e-12 the truncation error is O(1e-24), well under f64 round-off.
const TAYLOR_EPS_SQ: f64 = 1e-12;

/// Unit quaternion in `(w, x, y, z)` order with canonical sign `w >= 0`.
///
/// Constructors normalize and canonicalize, so every value of this type is a
/// valid rotation and the double cover never leaks into comparisons.
/// Serialized as `[w, x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 4]", into = "[T; 4]")]
#[serde(bound(serialize = "T: Serialize + Copy + Real", deserialize = "T: Deserialize<'de> + Real"))]
pub struct UnitQuat<T> {
    w: T,
    x: T,
    y: T,
    z: T,
}

impl<T: Real> From<[T; 4]> for UnitQuat<T> {
    fn from([w, x, y, z]: [T; 4]) -> Self {
        UnitQuat::new(w, x, y, z)
    }
}

impl<T: Real + Copy> From<UnitQuat<T>> for [T; 4] {
    fn from(q: UnitQuat<T>) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl<T: Real> UnitQuat<T> {
    /// Normalizing, sign-canonicalizing constructor.
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        let q = UnitQuat {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        };
        q.canonicalized()
    }

    /// Build from components that are already unit-norm (e.g. products of
    /// unit quaternions). Only canonicalizes the sign.
    fn from_unit(w: T, x: T, y: T, z: T) -> Self {
        UnitQuat { w, x, y, z }.canonicalized()
    }

    fn canonicalized(self) -> Self {
        if self.w < T::zero() {
            UnitQuat {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    pub fn identity() -> Self {
        UnitQuat {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    pub fn wxyz(&self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(&self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn scalar(&self) -> T {
        self.w
    }

    /// Rotation about `axis` (need not be unit) by `angle` radians.
    pub fn from_axis_angle(axis: &Vec3<T>, angle: T) -> Self {
        Self::exp(&axis.normalized().scale(angle))
    }

    /// Exponential map: rotation vector (angle times unit axis) to quaternion.
    pub fn exp(rot: &Vec3<T>) -> Self {
        let theta_sq = rot.norm_squared();
        let half = T::of(0.5);
        let (w, k) = if theta_sq < T::of(TAYLOR_EPS_SQ) {
            // cos(θ/2) ≈ 1 - θ²/8, sin(θ/2)/θ ≈ 1/2 - θ²/48
            (
                T::one() - theta_sq * T::of(0.125),
                half - theta_sq / T::of(48.0),
            )
        } else {
            let theta = theta_sq.sqrt();
            ((theta * half).cos(), (theta * half).sin() / theta)
        };
        UnitQuat::from_unit(w, rot.x * k, rot.y * k, rot.z * k)
    }

    /// Logarithm map: rotation vector of this quaternion, angle in `[0, π]`
    /// for canonical sign.
    pub fn log(&self) -> Vec3<T> {
        let q = self.canonicalized();
        let v = q.vector();
        let s_sq = v.norm_squared();
        if s_sq < T::of(TAYLOR_EPS_SQ) {
            // θ/sin(θ/2) ≈ 2/w · (1 - s²/(3w²)) for s = sin(θ/2) → 0
            let k = T::of(2.0) / q.w - T::of(2.0 / 3.0) * s_sq / (q.w * q.w * q.w);
            v.scale(k)
        } else {
            let s = s_sq.sqrt();
            let theta = T::of(2.0) * s.atan2(q.w);
            v.scale(theta / s)
        }
    }

    /// Hamilton product.
    pub fn mul(&self, rhs: &Self) -> Self {
        UnitQuat::from_unit(
            self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        )
    }

    pub fn conjugate(&self) -> Self {
        UnitQuat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
        .canonicalized()
    }

    /// Rotate a vector: q v q*.
    pub fn rotate(&self, v: &Vec3<T>) -> Vec3<T> {
        let u = self.vector();
        let two = T::of(2.0);
        let uv = u.cross(v);
        let uuv = u.cross(&uv);
        *v + uv.scale(two * self.w) + uuv.scale(two)
    }

    /// Row-major rotation matrix.
    pub fn rotation_matrix(&self) -> [[T; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let two = T::of(2.0);
        let one = T::one();
        [
            [
                one - two * (y * y + z * z),
                two * (x * y - w * z),
                two * (x * z + w * y),
            ],
            [
                two * (x * y + w * z),
                one - two * (x * x + z * z),
                two * (y * z - w * x),
            ],
            [
                two * (x * z - w * y),
                two * (y * z + w * x),
                one - two * (x * x + y * y),
            ],
        ]
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Chordal distance over the double cover: min(|a-b|, |a+b|).
    pub fn chordal_distance(&self, rhs: &Self) -> T {
        let d2 = |sgn: T| {
            let dw = self.w - sgn * rhs.w;
            let dx = self.x - sgn * rhs.x;
            let dy = self.y - sgn * rhs.y;
            let dz = self.z - sgn * rhs.z;
            dw * dw + dx * dx + dy * dy + dz * dz
        };
        d2(T::one()).min(d2(-T::one())).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Component-wise scalar conversion. Skips renormalization: the input
    /// invariant carries over exactly.
    pub fn map<U: Real>(&self, mut f: impl FnMut(T) -> U) -> UnitQuat<U> {
        UnitQuat {
            w: f(self.w),
            x: f(self.x),
            y: f(self.y),
            z: f(self.z),
        }
    }
}
