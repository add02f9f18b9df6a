//! Calibrated Gaussian perturbation of measures.
//!
//! Vectors and translations are perturbed in Euclidean space; rotations are
//! perturbed on the quaternion manifold by retracting a Gaussian tangent.
//! Every injection reports the realized input-ADD levels so sweeps can be
//! plotted on an ADD axis regardless of the sigmas that produced them.
//!
//! Point noise models a depth/association error at t0 that the flow
//! pipeline carries into the t1 coordinates: one draw per camera per point,
//! added to both of that camera's observations (m6/m8 share a draw, m7/m9
//! share a draw). Per-point draws are keyed on the point's own t0
//! coordinates, so reordering a dataset permutes its noise with it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, TangentDelta, Vec3};
use crate::metrics::{add_flow, add_points, add_transform};
use crate::residuals::MeasureSet;

/// Mean norm of a 3D isotropic Gaussian with unit per-axis std: sqrt(8/pi).
pub const NORM_MEAN_FACTOR: f64 = 1.5957691216057308;

/// Mean norm of a 2D isotropic Gaussian with unit per-axis std: sqrt(pi/2).
pub const NORM_MEAN_FACTOR_2D: f64 = 1.2533141373155003;

/// Noise levels for one injection. All sigmas are per-axis standard
/// deviations; meters except `sigma_rot` (radians).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Point coordinate noise for m6–m9.
    pub sigma_point: f64,
    /// Flow noise for m5.
    pub sigma_flow: f64,
    /// Translation noise for m1–m4.
    pub sigma_trans: f64,
    /// Rotation tangent noise for m1–m4.
    pub sigma_rot: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn zero(seed: u64) -> Self {
        NoiseSpec {
            sigma_point: 0.0,
            sigma_flow: 0.0,
            sigma_trans: 0.0,
            sigma_rot: 0.0,
            seed,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_point == 0.0
            && self.sigma_flow == 0.0
            && self.sigma_trans == 0.0
            && self.sigma_rot == 0.0
    }
}

/// Per-axis sigma whose draws realize a target mean-norm ADD.
pub fn sigma_for_add(add_target: f64) -> f64 {
    add_target / NORM_MEAN_FACTOR
}

/// Rotation sigma whose ADD contribution at the scene's characteristic
/// radius is the target: the tangent noise displaces a point at radius `r`
/// by a 2D Gaussian with per-axis std `sigma * r`.
pub fn rotation_sigma_for_add(add_target: f64, characteristic_radius: f64) -> f64 {
    add_target / (characteristic_radius * NORM_MEAN_FACTOR_2D)
}

/// Realized distances of the noisy inputs from ground truth, meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputAdd {
    /// Over m6–m9.
    pub add_in_da: f64,
    /// Over m1–m4, probed at the scene points.
    pub add_in_tf: f64,
    /// Over m5.
    pub add_in_sf: f64,
}

fn normal3(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// `v + g`, `g` isotropic Gaussian with per-axis std `sigma`.
pub fn perturb_vector(v: &Vec3<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> Vec3<f64> {
    if sigma == 0.0 {
        return *v;
    }
    *v + normal3(rng).scale(sigma)
}

/// Euclidean translation noise plus manifold rotation noise via retraction.
pub fn perturb_pose(
    pose: &Pose<f64>,
    sigma_trans: f64,
    sigma_rot: f64,
    rng: &mut ChaCha8Rng,
) -> Pose<f64> {
    let trans = if sigma_trans == 0.0 {
        Vec3::zeros()
    } else {
        normal3(rng).scale(sigma_trans)
    };
    let rot = if sigma_rot == 0.0 {
        Vec3::zeros()
    } else {
        normal3(rng).scale(sigma_rot)
    };
    pose.retract(&TangentDelta::new(trans, rot))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stream keyed on the point's content rather than its array position.
fn keyed_rng(seed: u64, tag: u64, key: &Vec3<f64>) -> ChaCha8Rng {
    let mut h = splitmix64(seed ^ splitmix64(tag));
    for bits in [key.x.to_bits(), key.y.to_bits(), key.z.to_bits()] {
        h = splitmix64(h ^ bits);
    }
    ChaCha8Rng::seed_from_u64(h)
}

const TAG_CAM_A: u64 = 1;
const TAG_CAM_B: u64 = 2;
const TAG_FLOW: u64 = 3;
const TAG_POSE: u64 = 4;

/// Perturb all present measures and report the realized input ADDs.
/// The input set is untouched.
pub fn perturb_measures(measures: &MeasureSet<f64>, spec: &NoiseSpec) -> (MeasureSet<f64>, InputAdd) {
    let mut noisy = measures.clone();
    let n = measures.n_points().unwrap_or(0);

    // Content keys: the t0 observation of each point, per camera.
    let key_a: Option<Vec<Vec3<f64>>> = measures
        .m6
        .as_ref()
        .map(|v| v.iter().map(|p| p.coords).collect());
    let key_b: Option<Vec<Vec3<f64>>> = measures
        .m7
        .as_ref()
        .map(|v| v.iter().map(|p| p.coords).collect());
    let fallback_key = |i: usize| Vec3::new(i as f64, 0.0, 0.0);

    for i in 0..n {
        let ka = key_a
            .as_ref()
            .map(|k| k[i])
            .or_else(|| key_b.as_ref().map(|k| k[i]))
            .unwrap_or_else(|| fallback_key(i));
        let kb = key_b
            .as_ref()
            .map(|k| k[i])
            .or_else(|| key_a.as_ref().map(|k| k[i]))
            .unwrap_or_else(|| fallback_key(i));

        if spec.sigma_point > 0.0 {
            let eps = normal3(&mut keyed_rng(spec.seed, TAG_CAM_A, &ka)).scale(spec.sigma_point);
            let eta = normal3(&mut keyed_rng(spec.seed, TAG_CAM_B, &kb)).scale(spec.sigma_point);
            if let Some(m6) = noisy.m6.as_mut() {
                m6[i].coords = m6[i].coords + eps;
            }
            if let Some(m8) = noisy.m8.as_mut() {
                m8[i].coords = m8[i].coords + eps;
            }
            if let Some(m7) = noisy.m7.as_mut() {
                m7[i].coords = m7[i].coords + eta;
            }
            if let Some(m9) = noisy.m9.as_mut() {
                m9[i].coords = m9[i].coords + eta;
            }
        }
        if spec.sigma_flow > 0.0 {
            if let Some(m5) = noisy.m5.as_mut() {
                let g = normal3(&mut keyed_rng(spec.seed, TAG_FLOW, &kb)).scale(spec.sigma_flow);
                m5[i].delta = m5[i].delta + g;
            }
        }
    }

    if spec.sigma_trans > 0.0 || spec.sigma_rot > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ splitmix64(TAG_POSE)));
        for pose in [&mut noisy.m1, &mut noisy.m2, &mut noisy.m3, &mut noisy.m4] {
            if let Some(p) = pose {
                *p = perturb_pose(p, spec.sigma_trans, spec.sigma_rot, &mut rng);
            }
        }
    }

    let record = realized_input_add(measures, &noisy);
    (noisy, record)
}

/// ADD levels of a noisy set against its ground truth.
pub fn realized_input_add(truth: &MeasureSet<f64>, noisy: &MeasureSet<f64>) -> InputAdd {
    let coords = |pts: &Vec<crate::geometry::Point3<f64>>| -> Vec<Vec3<f64>> {
        pts.iter().map(|p| p.coords).collect()
    };

    let mut da_terms = Vec::new();
    for (a, b) in [
        (&truth.m6, &noisy.m6),
        (&truth.m7, &noisy.m7),
        (&truth.m8, &noisy.m8),
        (&truth.m9, &noisy.m9),
    ] {
        if let (Some(a), Some(b)) = (a, b) {
            if let Ok(v) = add_points(&coords(a), &coords(b)) {
                da_terms.push(v);
            }
        }
    }
    let add_in_da = mean(&da_terms);

    // Probe each pose at the scene points expressed in its source frame.
    let probe_sets: [Option<Vec<Vec3<f64>>>; 4] = [
        truth.m7.as_ref().map(|v| coords(v)),
        truth.m9.as_ref().map(|v| coords(v)),
        truth.m8.as_ref().map(|v| coords(v)),
        truth.m9.as_ref().map(|v| coords(v)),
    ];
    let fallback = probe_sets.iter().flatten().next().cloned();
    let mut tf_terms = Vec::new();
    for (idx, (a, b)) in [
        (&truth.m1, &noisy.m1),
        (&truth.m2, &noisy.m2),
        (&truth.m3, &noisy.m3),
        (&truth.m4, &noisy.m4),
    ]
    .into_iter()
    .enumerate()
    {
        if let (Some(a), Some(b)) = (a, b) {
            let probes = probe_sets[idx].as_ref().or(fallback.as_ref());
            if let Some(probes) = probes {
                if let Ok(v) = add_transform(a, b, probes) {
                    tf_terms.push(v);
                }
            }
        }
    }
    let add_in_tf = mean(&tf_terms);

    let add_in_sf = match (&truth.m5, &noisy.m5) {
        (Some(a), Some(b)) => add_flow(a, b).unwrap_or(0.0),
        _ => 0.0,
    };

    InputAdd {
        add_in_da,
        add_in_tf,
        add_in_sf,
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
