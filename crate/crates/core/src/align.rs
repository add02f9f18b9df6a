//! Closed-form rigid alignment of corresponded point sets.
//!
//! Used to warm-start the between-camera transforms and as the reference
//! solution for data-association-only problems.

use nalgebra::{Matrix3, RealField, Vector3};

use crate::geometry::{FramePair, Pose, UnitQuat, Vec3};
use crate::scalar::Real;

/// Least-squares rigid transform `T` minimizing `Σ ‖dst_i - T(src_i)‖²`,
/// via SVD of the cross-covariance with determinant correction.
///
/// Returns `None` for fewer than three points or a degenerate covariance.
pub fn rigid_align<T: Real + RealField>(
    src: &[Vec3<T>],
    dst: &[Vec3<T>],
    frames: FramePair,
) -> Option<Pose<T>> {
    if src.len() < 3 || src.len() != dst.len() {
        return None;
    }
    let n = T::of(src.len() as f64);
    let mut src_mean = Vec3::zeros();
    let mut dst_mean = Vec3::zeros();
    for (s, d) in src.iter().zip(dst) {
        src_mean = src_mean + *s;
        dst_mean = dst_mean + *d;
    }
    src_mean = src_mean.scale(num_traits::Float::recip(n));
    dst_mean = dst_mean.scale(num_traits::Float::recip(n));

    let mut cov = Matrix3::<T>::zeros();
    for (s, d) in src.iter().zip(dst) {
        let sc = *s - src_mean;
        let dc = *d - dst_mean;
        let sv = Vector3::new(sc.x, sc.y, sc.z);
        let dv = Vector3::new(dc.x, dc.y, dc.z);
        cov += dv * sv.transpose();
    }

    let svd = cov.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut rot = u * v_t;
    if rot.determinant() < T::zero() {
        let mut u_fixed = u;
        u_fixed.column_mut(2).neg_mut();
        rot = u_fixed * v_t;
    }

    let quat = quat_from_matrix(&rot);
    let rotated = quat.rotate(&src_mean);
    Some(Pose::new(quat, dst_mean - rotated, frames))
}

/// Shepperd's method: pick the largest diagonal branch for stability.
fn quat_from_matrix<T: Real + RealField>(m: &Matrix3<T>) -> UnitQuat<T> {
    let quarter = T::of(0.25);
    let one = T::one();
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let (w, x, y, z) = if trace > T::zero() {
        let s = num_traits::Float::sqrt(trace + one) * T::of(2.0);
        (
            quarter * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        )
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = num_traits::Float::sqrt(one + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]) * T::of(2.0);
        (
            (m[(2, 1)] - m[(1, 2)]) / s,
            quarter * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        )
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = num_traits::Float::sqrt(one + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]) * T::of(2.0);
        (
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            quarter * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        )
    } else {
        let s = num_traits::Float::sqrt(one + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]) * T::of(2.0);
        (
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            quarter * s,
        )
    };
    UnitQuat::new(w, x, y, z)
}
