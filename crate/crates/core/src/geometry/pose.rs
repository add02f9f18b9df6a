use serde::{Deserialize, Serialize};

use super::quat::UnitQuat;
use super::vec::Vec3;
use crate::scalar::Real;

/// Reference frames of the two-camera, two-instant setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    /// Camera A at t0.
    A0,
    /// Camera A at t1.
    A1,
    /// Camera B at t0.
    B0,
    /// Camera B at t1.
    B1,
    World,
}

/// Coordinate mapping direction of a pose: points expressed in `from` come
/// out expressed in `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FramePair {
    pub from: Frame,
    pub to: Frame,
}

impl FramePair {
    pub fn new(from: Frame, to: Frame) -> Self {
        FramePair { from, to }
    }

    pub fn world() -> Self {
        FramePair::new(Frame::World, Frame::World)
    }

    pub fn inverse(self) -> Self {
        FramePair::new(self.to, self.from)
    }
}

/// 3D point with the frame its coordinates are expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct Point3<T> {
    pub coords: Vec3<T>,
    pub frame: Frame,
}

impl<T: Real> Point3<T> {
    pub fn new(coords: Vec3<T>, frame: Frame) -> Self {
        Point3 { coords, frame }
    }

    /// Advance the point by a flow vector expressed in the same frame.
    pub fn advance(&self, flow: &FlowVector<T>) -> Point3<T> {
        debug_assert_eq!(self.frame, flow.frame, "flow applied across frames");
        Point3::new(self.coords + flow.delta, self.frame)
    }

    /// Coordinate difference; both points must live in the same frame.
    pub fn sub(&self, rhs: &Point3<T>) -> Vec3<T> {
        debug_assert_eq!(self.frame, rhs.frame, "point difference across frames");
        self.coords - rhs.coords
    }

    pub fn map<U: Real>(&self, f: impl FnMut(T) -> U) -> Point3<U> {
        Point3::new(self.coords.map(f), self.frame)
    }
}

/// Displacement of a scene point between t0 and t1, expressed in `frame`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct FlowVector<T> {
    pub delta: Vec3<T>,
    pub frame: Frame,
}

impl<T: Real> FlowVector<T> {
    pub fn new(delta: Vec3<T>, frame: Frame) -> Self {
        FlowVector { delta, frame }
    }

    pub fn zero(frame: Frame) -> Self {
        FlowVector::new(Vec3::zeros(), frame)
    }

    pub fn map<U: Real>(&self, f: impl FnMut(T) -> U) -> FlowVector<U> {
        FlowVector::new(self.delta.map(f), self.frame)
    }
}

/// Local coordinates around a pose: `[translation(3), rotation(3)]`,
/// meters and radians. Retracting a zero delta is the identity map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct TangentDelta<T> {
    pub trans: Vec3<T>,
    pub rot: Vec3<T>,
}

impl<T: Real> TangentDelta<T> {
    pub fn new(trans: Vec3<T>, rot: Vec3<T>) -> Self {
        TangentDelta { trans, rot }
    }

    pub fn zero() -> Self {
        TangentDelta::new(Vec3::zeros(), Vec3::zeros())
    }

    /// `[trans, rot]` stacking used by residual vectors and Jacobians.
    pub fn as_array(&self) -> [T; 6] {
        [
            self.trans.x,
            self.trans.y,
            self.trans.z,
            self.rot.x,
            self.rot.y,
            self.rot.z,
        ]
    }

    pub fn from_array(a: [T; 6]) -> Self {
        TangentDelta::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]))
    }

    /// Delta with a one in tangent coordinate `k` (0..6) and zeros elsewhere.
    pub fn basis(k: usize, value: T) -> Self {
        let mut a = [T::zero(); 6];
        a[k] = value;
        TangentDelta::from_array(a)
    }

    pub fn norm(&self) -> T {
        (self.trans.norm_squared() + self.rot.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.trans.is_finite() && self.rot.is_finite()
    }
}

/// Rigid SE(3) transform: unit quaternion plus translation, tagged with the
/// coordinate frames it maps between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy + Real", deserialize = "T: Deserialize<'de> + Real"))]
pub struct Pose<T> {
    pub rotation: UnitQuat<T>,
    pub translation: Vec3<T>,
    pub frames: FramePair,
}

impl<T: Real> Pose<T> {
    pub fn new(rotation: UnitQuat<T>, translation: Vec3<T>, frames: FramePair) -> Self {
        Pose {
            rotation,
            translation,
            frames,
        }
    }

    pub fn identity(frames: FramePair) -> Self {
        Pose::new(UnitQuat::identity(), Vec3::zeros(), frames)
    }

    pub fn from_translation(translation: Vec3<T>, frames: FramePair) -> Self {
        Pose::new(UnitQuat::identity(), translation, frames)
    }

    /// Transform mapping points through `rhs` first, then `self`.
    pub fn compose(&self, rhs: &Pose<T>) -> Pose<T> {
        debug_assert_eq!(
            self.frames.from, rhs.frames.to,
            "compose: inner frames disagree"
        );
        Pose::new(
            self.rotation.mul(&rhs.rotation),
            self.rotation.rotate(&rhs.translation) + self.translation,
            FramePair::new(rhs.frames.from, self.frames.to),
        )
    }

    pub fn inverse(&self) -> Pose<T> {
        let rot_inv = self.rotation.conjugate();
        Pose::new(
            rot_inv,
            -rot_inv.rotate(&self.translation),
            self.frames.inverse(),
        )
    }

    /// Apply to a point: `R p + t`, retagging into the target frame.
    pub fn apply(&self, p: &Point3<T>) -> Point3<T> {
        debug_assert_eq!(self.frames.from, p.frame, "apply: point frame mismatch");
        Point3::new(
            self.rotation.rotate(&p.coords) + self.translation,
            self.frames.to,
        )
    }

    /// Rotate a direction/displacement (no translation), retagging frames.
    pub fn rotate_flow(&self, f: &FlowVector<T>) -> FlowVector<T> {
        debug_assert_eq!(self.frames.from, f.frame, "rotate_flow: frame mismatch");
        FlowVector::new(self.rotation.rotate(&f.delta), self.frames.to)
    }

    /// Manifold plus: right-multiplicative rotation update, additive
    /// translation update. The result is renormalized by construction.
    pub fn retract(&self, d: &TangentDelta<T>) -> Pose<T> {
        Pose::new(
            self.rotation.mul(&UnitQuat::exp(&d.rot)),
            self.translation + d.trans,
            self.frames,
        )
    }

    /// Manifold minus: the delta such that `self.retract(delta) == other`,
    /// up to the double cover (always the shortest rotation).
    pub fn local(&self, other: &Pose<T>) -> TangentDelta<T> {
        debug_assert_eq!(self.frames, other.frames, "local: frame mismatch");
        let q_rel = self.rotation.conjugate().mul(&other.rotation);
        TangentDelta::new(other.translation - self.translation, q_rel.log())
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.is_finite() && self.translation.is_finite()
    }

    /// Component-wise scalar conversion (e.g. `f64` to `f32` or to duals).
    pub fn map<U: Real>(&self, mut f: impl FnMut(T) -> U) -> Pose<U> {
        Pose {
            rotation: self.rotation.map(&mut f),
            translation: self.translation.map(&mut f),
            frames: self.frames,
        }
    }

    pub fn from_f64(p: &Pose<f64>) -> Self {
        p.map(T::of)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn wf() -> FramePair {
        FramePair::world()
    }

    #[test]
    fn compose_maps_through_rhs_then_self() {
        let rot = Pose::new(
            UnitQuat::from_axis_angle(&Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2),
            Vec3::zeros(),
            wf(),
        );
        let trans = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0), wf());
        let combined = rot.compose(&trans);
        let p = combined.apply(&Point3::new(Vec3::zeros(), Frame::World));
        assert!((p.coords - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inverse_of_translation() {
        let t = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0), wf());
        let inv = t.inverse();
        assert!((inv.translation - Vec3::new(-1.0, -2.0, -3.0)).norm() < 1e-15);
        let round = t.compose(&inv);
        assert!(round.translation.norm() < 1e-15);
        assert!(round.rotation.chordal_distance(&UnitQuat::identity()) < 1e-15);
    }

    #[test]
    fn retract_zero_is_identity_map() {
        let p = Pose::new(
            UnitQuat::exp(&Vec3::new(0.1, 0.2, -0.3)),
            Vec3::new(0.4, 0.5, 0.6),
            wf(),
        );
        let r = p.retract(&TangentDelta::zero());
        assert_eq!(p, r);
    }

    #[test]
    fn retract_quarter_turn() {
        let d = TangentDelta::new(Vec3::zeros(), Vec3::new(0.0, 0.0, FRAC_PI_2));
        let p = Pose::identity(wf()).retract(&d);
        let expected = UnitQuat::from_axis_angle(&Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2);
        assert!(p.rotation.chordal_distance(&expected) < 1e-9);
    }

    #[test]
    fn local_of_pure_translation() {
        let a = Pose::identity(wf());
        let b = Pose::from_translation(Vec3::new(0.01, 0.0, 0.0), wf());
        let d = a.local(&b);
        assert!((d.trans - Vec3::new(0.01, 0.0, 0.0)).norm() < 1e-15);
        assert!(d.rot.norm() < 1e-15);
    }

    #[test]
    fn frames_propagate() {
        let m1 = Pose::identity(FramePair::new(Frame::B0, Frame::A0));
        let m3_inv = Pose::identity(FramePair::new(Frame::A0, Frame::A1));
        let chained = m3_inv.compose(&m1);
        assert_eq!(chained.frames, FramePair::new(Frame::B0, Frame::A1));
        let p = Point3::new(Vec3::new(1.0, 2.0, 3.0), Frame::B0);
        assert_eq!(chained.apply(&p).frame, Frame::A1);
    }
}
