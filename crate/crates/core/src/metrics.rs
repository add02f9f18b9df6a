//! Average-distance (ADD) metrics for point sets, transforms, and flows.
//!
//! The same scene-space metric quantifies both input-noise levels and output
//! errors: mean by-index Euclidean distance. For transforms the distance is
//! taken between probe points pushed through the two poses; the probe set is
//! recorded alongside every value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FlowVector, Pose, Vec3};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("point lists have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("metric over an empty list")]
    Empty,
}

/// Mean by-index distance between two point lists.
pub fn add_points<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>]) -> Result<T, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sum = T::zero();
    for (pa, pb) in a.iter().zip(b) {
        sum = sum + (*pa - *pb).norm();
    }
    Ok(sum / T::of(a.len() as f64))
}

/// ADD between two transforms: probes pushed through both poses, then
/// [`add_points`]. Probes are coordinates in the poses' source frame.
pub fn add_transform<T: Real>(
    gt: &Pose<T>,
    est: &Pose<T>,
    probes: &[Vec3<T>],
) -> Result<T, MetricsError> {
    if probes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let through = |pose: &Pose<T>| -> Vec<Vec3<T>> {
        probes
            .iter()
            .map(|p| pose.rotation.rotate(p) + pose.translation)
            .collect()
    };
    add_points(&through(gt), &through(est))
}

/// ADD between two flow fields: mean by-index distance of the vectors.
pub fn add_flow<T: Real>(gt: &[FlowVector<T>], est: &[FlowVector<T>]) -> Result<T, MetricsError> {
    if gt.len() != est.len() {
        return Err(MetricsError::LengthMismatch(gt.len(), est.len()));
    }
    if gt.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sum = T::zero();
    for (a, b) in gt.iter().zip(est) {
        sum = sum + (a.delta - b.delta).norm();
    }
    Ok(sum / T::of(gt.len() as f64))
}

/// Input- and output-ADD values of one run, all in meters.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AddRecord {
    /// Per-pose output error, indexed x1..x4. `None` when not evaluated
    /// (e.g. the parameter was fixed or not part of the problem).
    pub add_out_tf: [Option<f64>; 4],
    pub add_out_sf: Option<f64>,
    pub add_in_da: f64,
    pub add_in_tf: f64,
    pub add_in_sf: f64,
    /// Where the transform probes came from.
    pub probe_set: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Frame, FramePair, UnitQuat};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identical_lists_are_zero() {
        let a = vec![Vec3::new(1.0, 2.0, 3.0); 5];
        assert_eq!(add_points(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn shifted_by_3_4_0_mm_gives_5_mm() {
        let a: Vec<Vec3<f64>> = (0..7).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let b: Vec<Vec3<f64>> = a
            .iter()
            .map(|p| *p + Vec3::new(0.003, 0.004, 0.0))
            .collect();
        assert!((add_points(&a, &b).unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn random_lists_match_naive_two_pass_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        let a: Vec<Vec3<f64>> = (0..50)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let b: Vec<Vec3<f64>> = (0..50)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let mut naive = 0.0;
        for i in 0..a.len() {
            let dx: f64 = a[i].x - b[i].x;
            let dy: f64 = a[i].y - b[i].y;
            let dz: f64 = a[i].z - b[i].z;
            naive += (dx * dx + dy * dy + dz * dz).sqrt();
        }
        naive /= a.len() as f64;
        let got = add_points(&a, &b).unwrap();
        assert!((got - naive).abs() <= 1e-15 * naive);
    }

    #[test]
    fn transform_translation_only_error_is_exact() {
        let frames = FramePair::world();
        let gt = Pose::identity(frames);
        let est = Pose::from_translation(Vec3::new(0.001, 0.0, 0.0), frames);
        let probes = vec![
            Vec3::new(5.0, -3.0, 2.0),
            Vec3::new(0.1, 0.2, 0.3),
            Vec3::new(-9.0, 4.0, 1.0),
        ];
        let add: f64 = add_transform(&gt, &est, &probes).unwrap();
        assert!((add - 0.001).abs() < 1e-15);
    }

    #[test]
    fn transform_rotation_error_matches_chord_formula() {
        // 1 degree about z, probes on a 50 mm ring in the xy-plane:
        // every probe moves by the chord 2 r sin(θ/2).
        let frames = FramePair::world();
        let theta = 1.0f64.to_radians();
        let gt = Pose::identity(frames);
        let est = Pose::new(
            UnitQuat::from_axis_angle(&Vec3::new(0.0, 0.0, 1.0), theta),
            Vec3::zeros(),
            frames,
        );
        let probes: Vec<Vec3<f64>> = (0..24)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * (k as f64) / 24.0;
                Vec3::new(0.05 * phi.cos(), 0.05 * phi.sin(), 0.0)
            })
            .collect();
        let add = add_transform(&gt, &est, &probes).unwrap();
        let chord = 2.0 * 0.05 * (theta / 2.0).sin();
        assert!((add - chord).abs() < 1e-6);
        assert!((chord - 0.8727e-3).abs() < 1e-7);
    }

    #[test]
    fn flow_constant_offset() {
        let gt: Vec<FlowVector<f64>> = (0..4)
            .map(|_| FlowVector::new(Vec3::new(0.001, 0.002, 0.0), Frame::B0))
            .collect();
        let est: Vec<FlowVector<f64>> = gt
            .iter()
            .map(|f| FlowVector::new(f.delta + Vec3::new(0.0, 0.0, 0.001), Frame::B0))
            .collect();
        assert!((add_flow(&gt, &est).unwrap() - 0.001).abs() < 1e-15);
    }

    #[test]
    fn errors_on_bad_inputs() {
        let a = vec![Vec3::new(0.0, 0.0, 0.0)];
        let b: Vec<Vec3<f64>> = vec![];
        assert!(matches!(
            add_points(&a, &b),
            Err(MetricsError::LengthMismatch(1, 0))
        ));
        assert!(matches!(add_points(&b, &b), Err(MetricsError::Empty)));
        let gt = Pose::<f64>::identity(FramePair::world());
        assert!(matches!(
            add_transform(&gt, &gt, &[]),
            Err(MetricsError::Empty)
        ));
    }
}
