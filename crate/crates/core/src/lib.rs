//! Joint estimation of two-camera ego-motion, between-camera transforms, and
//! per-point absolute scene flow of a deforming scene.
//!
//! The library stacks four residual families over a pair of time instants —
//! cross-camera data association, scene-flow transport across time,
//! kinematic loop closure, and per-parameter measurement priors — and
//! minimizes the weighted sum of squares with a manifold Levenberg-Marquardt
//! solver. A synthetic scene generator, a calibrated Gaussian noise model,
//! and average-distance (ADD) metrics support end-to-end evaluation.
//!
//! Math modules ([`geometry`], [`residuals`], [`metrics`]) are generic over
//! the scalar type through [`scalar::Real`]; `f64` aliases for the common
//! types live at the crate root. The solver accepts any scalar that also
//! supports nalgebra factorizations (`f32`/`f64`) and differentiates
//! residuals with forward-mode [`dual`] numbers.

pub mod align;
pub mod dual;
pub mod geometry;
pub mod metrics;
pub mod noise;
pub mod residuals;
pub mod scalar;
pub mod solver;
pub mod synth;

pub use geometry::{FlowVector, Frame, FramePair, Point3, Pose, TangentDelta, UnitQuat, Vec3};
pub use residuals::{MeasureSet, ParameterSet, ProblemConfig};
pub use scalar::Real;

/// `f64` aliases for the core value types.
pub type Vec3d = Vec3<f64>;
pub type Posed = Pose<f64>;
pub type Point3d = Point3<f64>;
pub type FlowVectord = FlowVector<f64>;
pub type TangentDeltad = TangentDelta<f64>;
pub type MeasureSetd = MeasureSet<f64>;
pub type ParameterSetd = ParameterSet<f64>;

/// `f32` aliases; the math layers are scalar-generic.
pub type Vec3f = Vec3<f32>;
pub type Posef = Pose<f32>;
pub type Point3f = Point3<f32>;
pub type FlowVectorf = FlowVector<f32>;
pub type TangentDeltaf = TangentDelta<f32>;
