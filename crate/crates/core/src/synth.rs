//! Synthetic two-camera deforming-scene generation.
//!
//! Replaces a rendering pipeline with geometry only: points are sampled on a
//! smooth surface patch, displaced by a smooth low-frequency deformation
//! field, and observed by two independently moving cameras. Ground-truth
//! kinematics yield exact measures m1–m9, including the relative-to-absolute
//! scene-flow conversion. Generation is deterministic per seed.
//!
//! Worlds and scenarios serialize to versioned JSON; lengths are meters and
//! quaternions are stored `[w, x, y, z]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FlowVector, Frame, FramePair, Point3, Pose, UnitQuat, Vec3};
use crate::residuals::MeasureSet;

/// Pinhole visibility cone half-angle (radians). Generous by design; the
/// optimization consumes point lists, not images.
const FOV_HALF_ANGLE: f64 = 60.0 * std::f64::consts::PI / 180.0;

/// Resampling attempts before declaring the overlap target infeasible.
const MAX_ATTEMPTS: usize = 8;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    BadConfig(String),
    #[error("overlap target {target} infeasible: best achieved {achieved} after {MAX_ATTEMPTS} attempts")]
    OverlapInfeasible { achieved: f64, target: f64 },
    #[error("no points fall in both view cones at both times")]
    EmptyOverlap,
}

/// A camera pose in the world frame (camera-to-world).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSpec {
    pub translation: Vec3<f64>,
    pub rotation: UnitQuat<f64>,
}

impl PoseSpec {
    pub fn new(translation: Vec3<f64>, rotation: UnitQuat<f64>) -> Self {
        PoseSpec {
            translation,
            rotation,
        }
    }

    fn pose(&self, cam_frame: Frame) -> Pose<f64> {
        Pose::new(
            self.rotation,
            self.translation,
            FramePair::new(cam_frame, Frame::World),
        )
    }
}

/// Camera poses at the two instants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraTrajectory {
    pub t0: PoseSpec,
    pub t1: PoseSpec,
}

/// Scenario definition: everything needed to grow a world deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub seed: u64,
    pub n_points: usize,
    /// Patch extents along x and y, meters.
    pub surface_extent: [f64; 2],
    /// Patch center in the world frame, meters.
    #[serde(default = "default_patch_center")]
    pub patch_center: Vec3<f64>,
    /// Min and max per-point displacement norm, meters.
    pub deformation_amplitude: [f64; 2],
    pub camera_a: CameraTrajectory,
    pub camera_b: CameraTrajectory,
    /// Required fraction of points visible in both cameras at both times.
    pub overlap_fraction: f64,
    /// Match radius for overlap search, meters.
    pub match_radius: f64,
}

fn default_version() -> u32 {
    1
}

fn default_patch_center() -> Vec3<f64> {
    Vec3::new(0.0, 0.0, 0.12)
}

fn rot_y(angle_deg: f64) -> UnitQuat<f64> {
    UnitQuat::from_axis_angle(&Vec3::new(0.0, 1.0, 0.0), angle_deg.to_radians())
}

fn rot_z(angle_deg: f64) -> UnitQuat<f64> {
    UnitQuat::from_axis_angle(&Vec3::new(0.0, 0.0, 1.0), angle_deg.to_radians())
}

impl ScenarioConfig {
    /// Canonical test scenario: camera A starts at the world origin and
    /// translates 1 cm in x with a 2° yaw by t1; camera B starts 5 cm up
    /// with a -10° yaw and drifts slightly with a 1° roll; 100 points on an
    /// 8 x 6 cm patch deforming by 1–5 mm; seed 42.
    pub fn s1() -> Self {
        let a_t0 = PoseSpec::new(Vec3::zeros(), UnitQuat::identity());
        let a_t1 = PoseSpec::new(Vec3::new(0.01, 0.0, 0.0), rot_y(2.0));
        let b_t0 = PoseSpec::new(Vec3::new(0.0, 0.05, 0.0), rot_y(-10.0));
        let b_t1 = PoseSpec::new(
            b_t0.translation + Vec3::new(0.0, -0.005, 0.002),
            b_t0.rotation.mul(&rot_z(1.0)),
        );
        ScenarioConfig {
            version: 1,
            seed: 42,
            n_points: 100,
            surface_extent: [0.08, 0.06],
            patch_center: default_patch_center(),
            deformation_amplitude: [0.001, 0.005],
            camera_a: CameraTrajectory { t0: a_t0, t1: a_t1 },
            camera_b: CameraTrajectory { t0: b_t0, t1: b_t1 },
            overlap_fraction: 0.5,
            match_radius: 5e-5,
        }
    }

    /// S1 with camera A held static; the ego-motion prior then supervises a
    /// stationary camera.
    pub fn s1_static_a() -> Self {
        let mut config = Self::s1();
        config.camera_a.t1 = config.camera_a.t0;
        config
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n_points == 0 {
            return Err(SynthError::BadConfig("n_points must be >= 1".into()));
        }
        let [lo, hi] = self.deformation_amplitude;
        if lo < 0.0 || hi < lo {
            return Err(SynthError::BadConfig(format!(
                "bad amplitude range [{lo}, {hi}]"
            )));
        }
        if self.match_radius <= 0.0 {
            return Err(SynthError::BadConfig("match_radius must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) {
            return Err(SynthError::BadConfig(
                "overlap_fraction must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// The scene's characteristic radius: half-diagonal of the patch. Used
    /// by the noise model to convert rotation noise into an ADD-equivalent.
    pub fn characteristic_radius(&self) -> f64 {
        0.5 * (self.surface_extent[0].powi(2) + self.surface_extent[1].powi(2)).sqrt()
    }
}

/// One sinusoidal mode: sin(k · p + phase).
#[derive(Clone, Copy, Debug)]
struct Mode {
    k: Vec3<f64>,
    phase: f64,
}

impl Mode {
    fn sample(rng: &mut ChaCha8Rng, wavelength_range: (f64, f64)) -> Self {
        let dir = random_unit(rng);
        let wavelength = rng.gen_range(wavelength_range.0..=wavelength_range.1);
        Mode {
            k: dir.scale(2.0 * std::f64::consts::PI / wavelength),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        }
    }

    fn eval(&self, p: &Vec3<f64>) -> f64 {
        (self.k.dot(p) + self.phase).sin()
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v.scale(1.0 / n);
        }
    }
}

/// Smooth displacement field with hard norm bounds: d(p) = m(p) u(p) with
/// m(p) in [amp_min, amp_max] and u a unit direction field.
#[derive(Clone, Debug)]
struct DeformationField {
    amp_min: f64,
    amp_max: f64,
    magnitude_mode: Mode,
    base_dir: Vec3<f64>,
    dir_modes: [Mode; 3],
    dir_blend: f64,
}

impl DeformationField {
    fn sample(rng: &mut ChaCha8Rng, amp: [f64; 2], patch_scale: f64) -> Self {
        // Wavelengths on the order of the patch keep the field low-frequency.
        let range = (patch_scale, 2.0 * patch_scale);
        DeformationField {
            amp_min: amp[0],
            amp_max: amp[1],
            magnitude_mode: Mode::sample(rng, range),
            base_dir: random_unit(rng),
            dir_modes: [
                Mode::sample(rng, range),
                Mode::sample(rng, range),
                Mode::sample(rng, range),
            ],
            dir_blend: 0.25,
        }
    }

    fn eval(&self, p: &Vec3<f64>) -> Vec3<f64> {
        let m = self.amp_min
            + (self.amp_max - self.amp_min) * 0.5 * (1.0 + self.magnitude_mode.eval(p));
        if m == 0.0 {
            return Vec3::zeros();
        }
        let wobble = Vec3::new(
            self.dir_modes[0].eval(p),
            self.dir_modes[1].eval(p),
            self.dir_modes[2].eval(p),
        );
        let dir = (self.base_dir + wobble.scale(self.dir_blend)).normalized();
        dir.scale(m)
    }

    /// Conservative bound on the field's spatial gradient norm.
    fn lipschitz_bound(&self) -> f64 {
        let k_mag = self.magnitude_mode.k.norm();
        let k_dir_sum: f64 = self.dir_modes.iter().map(|m| m.k.norm()).sum();
        let v_min = 1.0 - self.dir_blend * 3f64.sqrt();
        let l_magnitude = 0.5 * (self.amp_max - self.amp_min) * k_mag;
        let l_direction = self.amp_max * self.dir_blend * k_dir_sum / v_min;
        l_magnitude + l_direction
    }
}

/// Ground-truth state of one generated scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWorld {
    #[serde(default = "default_version")]
    pub version: u32,
    pub config: ScenarioConfig,
    /// World-frame point positions at t0 and t1, index-aligned.
    pub points_t0: Vec<Vec3<f64>>,
    pub points_t1: Vec<Vec3<f64>>,
    /// Whether the point lies in both view cones at both times.
    pub visible: Vec<bool>,
    /// Camera-to-world poses.
    pub cam_a_t0: Pose<f64>,
    pub cam_a_t1: Pose<f64>,
    pub cam_b_t0: Pose<f64>,
    pub cam_b_t1: Pose<f64>,
    /// Upper bound on the deformation field's spatial gradient norm.
    pub deformation_lipschitz: f64,
}

impl GroundTruthWorld {
    pub fn n_visible(&self) -> usize {
        self.visible.iter().filter(|v| **v).count()
    }

    /// Ground-truth absolute flow of every visible point, in B0, in emitted
    /// order.
    pub fn visible_flows_b0(&self) -> Vec<FlowVector<f64>> {
        let b0_from_world = self.cam_b_t0.inverse();
        self.points_t0
            .iter()
            .zip(&self.points_t1)
            .zip(&self.visible)
            .filter(|(_, vis)| **vis)
            .map(|((p0, p1), _)| {
                let a = b0_from_world.apply(&Point3::new(*p0, Frame::World));
                let b = b0_from_world.apply(&Point3::new(*p1, Frame::World));
                FlowVector::new(b.sub(&a), Frame::B0)
            })
            .collect()
    }
}

fn point_in_cone(world_from_cam: &Pose<f64>, p_world: &Vec3<f64>) -> bool {
    let cam_from_world = world_from_cam.inverse();
    let pc = cam_from_world
        .apply(&Point3::new(*p_world, Frame::World))
        .coords;
    let norm = pc.norm();
    norm > 0.0 && pc.z > 0.0 && pc.z / norm >= FOV_HALF_ANGLE.cos()
}

/// Grow a world: deterministic given the config's seed.
pub fn generate(config: &ScenarioConfig) -> Result<GroundTruthWorld, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let [ex, ey] = config.surface_extent;
    let patch_scale = (ex * ex + ey * ey).sqrt().max(1e-3);

    let cam_a_t0 = config.camera_a.t0.pose(Frame::A0);
    let cam_a_t1 = config.camera_a.t1.pose(Frame::A1);
    let cam_b_t0 = config.camera_b.t0.pose(Frame::B0);
    let cam_b_t1 = config.camera_b.t1.pose(Frame::B1);

    let mut best_fraction = 0.0f64;
    for _ in 0..MAX_ATTEMPTS {
        // Gentle height bumps make the patch a surface rather than a plane.
        let height = Mode::sample(&mut rng, (patch_scale, 2.0 * patch_scale));
        let height_amp = rng.gen_range(0.002..0.005);
        let field = DeformationField::sample(&mut rng, config.deformation_amplitude, patch_scale);

        let mut points_t0 = Vec::with_capacity(config.n_points);
        for _ in 0..config.n_points {
            let x = rng.gen_range(-0.5 * ex..=0.5 * ex);
            let y = rng.gen_range(-0.5 * ey..=0.5 * ey);
            let flat = Vec3::new(x, y, 0.0) + config.patch_center;
            let z_bump = height_amp * height.eval(&flat);
            points_t0.push(flat + Vec3::new(0.0, 0.0, z_bump));
        }
        let points_t1: Vec<Vec3<f64>> =
            points_t0.iter().map(|p| *p + field.eval(p)).collect();

        let visible: Vec<bool> = points_t0
            .iter()
            .zip(&points_t1)
            .map(|(p0, p1)| {
                point_in_cone(&cam_a_t0, p0)
                    && point_in_cone(&cam_b_t0, p0)
                    && point_in_cone(&cam_a_t1, p1)
                    && point_in_cone(&cam_b_t1, p1)
            })
            .collect();
        let fraction =
            visible.iter().filter(|v| **v).count() as f64 / config.n_points as f64;
        best_fraction = best_fraction.max(fraction);
        if fraction >= config.overlap_fraction {
            return Ok(GroundTruthWorld {
                version: 1,
                config: config.clone(),
                points_t0,
                points_t1,
                visible,
                cam_a_t0,
                cam_a_t1,
                cam_b_t0,
                cam_b_t1,
                deformation_lipschitz: field.lipschitz_bound(),
            });
        }
    }
    Err(SynthError::OverlapInfeasible {
        achieved: best_fraction,
        target: config.overlap_fraction,
    })
}

/// Exact measures from a ground-truth world. Only points passing the
/// visibility overlap are emitted; errors when none do.
pub fn derive_measures(world: &GroundTruthWorld) -> Result<MeasureSet<f64>, SynthError> {
    if world.n_visible() == 0 {
        return Err(SynthError::EmptyOverlap);
    }
    let a0_from_world = world.cam_a_t0.inverse();
    let a1_from_world = world.cam_a_t1.inverse();
    let b0_from_world = world.cam_b_t0.inverse();
    let b1_from_world = world.cam_b_t1.inverse();

    let mut m5 = Vec::new();
    let mut m6 = Vec::new();
    let mut m7 = Vec::new();
    let mut m8 = Vec::new();
    let mut m9 = Vec::new();
    for ((p0, p1), visible) in world
        .points_t0
        .iter()
        .zip(&world.points_t1)
        .zip(&world.visible)
    {
        if !visible {
            continue;
        }
        let p0_world = Point3::new(*p0, Frame::World);
        let p1_world = Point3::new(*p1, Frame::World);
        let in_b0_t0 = b0_from_world.apply(&p0_world);
        let in_b0_t1 = b0_from_world.apply(&p1_world);
        m6.push(a0_from_world.apply(&p0_world));
        m7.push(in_b0_t0);
        m8.push(a1_from_world.apply(&p1_world));
        m9.push(b1_from_world.apply(&p1_world));
        m5.push(FlowVector::new(in_b0_t1.sub(&in_b0_t0), Frame::B0));
    }

    Ok(MeasureSet {
        m1: Some(a0_from_world.compose(&world.cam_b_t0)),
        m2: Some(a1_from_world.compose(&world.cam_b_t1)),
        m3: Some(a0_from_world.compose(&world.cam_a_t1)),
        m4: Some(b0_from_world.compose(&world.cam_b_t1)),
        m5: Some(m5),
        m6: Some(m6),
        m7: Some(m7),
        m8: Some(m8),
        m9: Some(m9),
    })
}

/// Radius matching of two clouds registered into a common frame. Each point
/// appears in at most one pair; closest pairs win. Returns `(index_a,
/// index_b)` pairs. Backed by a uniform grid, so expected linear time.
pub fn match_overlap(
    cloud_a: &[Vec3<f64>],
    cloud_b: &[Vec3<f64>],
    radius: f64,
) -> Vec<(usize, usize)> {
    use std::collections::HashMap;

    let cell = |v: f64| (v / radius).floor() as i64;
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (j, p) in cloud_b.iter().enumerate() {
        grid.entry((cell(p.x), cell(p.y), cell(p.z)))
            .or_default()
            .push(j);
    }

    let r_sq = radius * radius;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in cloud_a.iter().enumerate() {
        let (cx, cy, cz) = (cell(p.x), cell(p.y), cell(p.z));
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(cell_points) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in cell_points {
                        let d_sq = (*p - cloud_b[j]).norm_squared();
                        if d_sq <= r_sq {
                            candidates.push((d_sq, i, j));
                        }
                    }
                }
            }
        }
    }

    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mut used_a = vec![false; cloud_a.len()];
    let mut used_b = vec![false; cloud_b.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Convert a relative scene flow (coordinate difference `m9 - m7` across
/// camera B's own frames) into the absolute flow in B0:
/// `x4 · (m7 + relative) - m7`. With a static camera (identity `x4`) the
/// absolute flow equals the relative flow.
pub fn relative_to_absolute_flow(
    relative: &FlowVector<f64>,
    m7: &Point3<f64>,
    x4: &Pose<f64>,
) -> FlowVector<f64> {
    debug_assert_eq!(m7.frame, Frame::B0, "m7 must live in B0");
    let advanced = Point3::new(m7.coords + relative.delta, x4.frames.from);
    FlowVector::new(x4.apply(&advanced).coords - m7.coords, x4.frames.to)
}
