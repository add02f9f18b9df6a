//! Frame-tagged SE(3) arithmetic and the quaternion local parameterization.
//!
//! Conventions fixed repo-wide:
//!
//! - Quaternions are stored `(w, x, y, z)` with canonical sign `w >= 0`; the
//!   norm is kept within `1e-12` of one by every constructor and retraction.
//! - Tangent deltas are 6-vectors ordered `[translation(3), rotation(3)]`,
//!   translation in meters, rotation as an angle-axis vector in radians.
//! - Retraction is right-multiplicative: `q ⊞ δ = q · exp(δ_rot / 2)` on the
//!   quaternion and `t + δ_trans` on the translation.
//! - A [`Pose`] maps point coordinates from its `from` frame into its `to`
//!   frame: `p_to = R · p_from + t`. Frame tags are metadata checked in
//!   debug builds; they never affect release-mode numerics.

mod pose;
mod quat;
mod vec;

pub use pose::{FlowVector, Frame, FramePair, Point3, Pose, TangentDelta};
pub use quat::UnitQuat;
pub use vec::Vec3;
