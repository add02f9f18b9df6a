//! Experiment specification, presets, and the sweep runner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use mvflow_core::geometry::{TangentDelta, Vec3};
use mvflow_core::metrics::{add_flow, add_transform};
use mvflow_core::noise::{
    perturb_measures, rotation_sigma_for_add, sigma_for_add, NoiseSpec,
};
use mvflow_core::residuals::{BlockWeights, ParameterSet, ProblemConfig, ProblemError};
use mvflow_core::solver::{solve, SolveError, SolveOptions};
use mvflow_core::synth::{derive_measures, generate, ScenarioConfig, SynthError};

use crate::ambiguity::{detect_ambiguity, AmbiguityReport};
use crate::emit::ResultRow;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario generation failed: {0}")]
    Synth(#[from] SynthError),
    #[error("solver setup failed: {0}")]
    Solve(#[from] SolveError),
    #[error("problem construction failed: {0}")]
    Problem(#[from] ProblemError),
    #[error("experiment id {0} out of range (0..=3)")]
    BadExperiment(u8),
    #[error("spec has an empty {0} list")]
    EmptySweep(&'static str),
}

/// How a known ego-motion measure (m3) enters the problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownPoseMode {
    /// Not applicable to this experiment.
    None,
    /// Hold x3 fixed at the measured m3 (column deletion).
    FixedParam,
    /// Leave x3 free under the KS3 prior.
    SoftPrior,
}

impl std::fmt::Display for KnownPoseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KnownPoseMode::None => "none",
            KnownPoseMode::FixedParam => "fixed",
            KnownPoseMode::SoftPrior => "soft_prior",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedScenario {
    pub name: String,
    pub config: ScenarioConfig,
}

/// One sweep point of noise sigmas (per-axis std devs; meters / radians).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub sigma_point: f64,
    pub sigma_flow: f64,
    pub sigma_trans: f64,
    pub sigma_rot: f64,
}

impl NoisePoint {
    pub fn zero() -> Self {
        NoisePoint::default()
    }

    /// Point noise whose realized ADD_inDA is about `add_target`.
    pub fn for_da_add(add_target: f64) -> Self {
        NoisePoint {
            sigma_point: sigma_for_add(add_target),
            ..NoisePoint::default()
        }
    }

    /// Add pose noise of roughly `add_order` ADD: translation sigma taken
    /// literally, rotation sigma converted at the scene's characteristic
    /// radius.
    pub fn with_pose_noise(mut self, add_order: f64, characteristic_radius: f64) -> Self {
        self.sigma_trans = add_order;
        self.sigma_rot = rotation_sigma_for_add(add_order, characteristic_radius);
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Experiment id, 0..=3; selects which measures are available.
    pub experiment: u8,
    pub scenarios: Vec<NamedScenario>,
    pub noise_sweep: Vec<NoisePoint>,
    /// Numbers of points with known absolute flow (KS5 subset sizes).
    /// Ignored when m5 is not part of the experiment.
    pub known_flow_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub solve: SolveOptions,
    pub rho: BlockWeights,
    pub known_pose_modes: Vec<KnownPoseMode>,
    /// Number of inits for the multi-start ambiguity check; 0 disables.
    #[serde(default)]
    pub ambiguity_inits: usize,
    /// Run the ambiguity check only when the known-flow count is at most
    /// this value.
    #[serde(default = "default_ambiguity_max_k")]
    pub ambiguity_max_k: usize,
}

fn default_version() -> u32 {
    1
}

fn default_ambiguity_max_k() -> usize {
    usize::MAX
}

impl ExperimentSpec {
    /// Measures available in each experiment.
    pub fn measure_mask(experiment: u8) -> Result<&'static [&'static str], RunError> {
        match experiment {
            0 => Ok(&["m1", "m2", "m6", "m7", "m8", "m9"]),
            1 => Ok(&["m3", "m6", "m7", "m8", "m9"]),
            2 => Ok(&["m5", "m6", "m7", "m8", "m9"]),
            3 => Ok(&["m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8", "m9"]),
            other => Err(RunError::BadExperiment(other)),
        }
    }

    /// Built-in defaults per experiment id.
    pub fn preset(experiment: u8) -> Result<Self, RunError> {
        let seeds: Vec<u64> = (0..10).collect();
        let spec = match experiment {
            0 => ExperimentSpec {
                version: 1,
                experiment,
                scenarios: vec![NamedScenario {
                    name: "s1".into(),
                    config: ScenarioConfig::s1(),
                }],
                noise_sweep: vec![NoisePoint::zero()],
                known_flow_counts: vec![0],
                seeds,
                solve: SolveOptions::default(),
                rho: BlockWeights::default(),
                known_pose_modes: vec![KnownPoseMode::None],
                ambiguity_inits: 4,
                ambiguity_max_k: usize::MAX,
            },
            1 => {
                // Sub-millimeter recovery of x4/x5 under data-association
                // noise rides on n-averaging of the cross-camera fit, so the
                // default scene carries more points, and the cross-camera
                // flow-transport rows are down-weighted to keep per-point
                // noise out of the flow estimates.
                let mut moving = ScenarioConfig::s1();
                moving.n_points = 800;
                let mut static_a = ScenarioConfig::s1_static_a();
                static_a.n_points = 800;
                let radius = moving.characteristic_radius();
                let mut sweep = Vec::new();
                for add_mm in [0.0, 2.0, 4.0, 6.0, 8.0, 10.0] {
                    sweep.push(NoisePoint::for_da_add(add_mm * 1e-3));
                }
                // Companion sweep: the same noise order applied to m3 too.
                for add_mm in [2.0, 4.0, 6.0, 8.0, 10.0] {
                    sweep.push(
                        NoisePoint::for_da_add(add_mm * 1e-3)
                            .with_pose_noise(add_mm * 1e-3, radius),
                    );
                }
                let mut rho = BlockWeights::default();
                rho.sft_a = 0.01;
                ExperimentSpec {
                    version: 1,
                    experiment,
                    scenarios: vec![
                        NamedScenario {
                            name: "s1_moving".into(),
                            config: moving,
                        },
                        NamedScenario {
                            name: "s1_static_a".into(),
                            config: static_a,
                        },
                    ],
                    noise_sweep: sweep,
                    known_flow_counts: vec![0],
                    seeds,
                    solve: SolveOptions::default(),
                    rho,
                    known_pose_modes: vec![KnownPoseMode::FixedParam, KnownPoseMode::SoftPrior],
                    ambiguity_inits: 0,
                    ambiguity_max_k: usize::MAX,
                }
            }
            2 => ExperimentSpec {
                version: 1,
                experiment,
                scenarios: vec![NamedScenario {
                    name: "s1".into(),
                    config: ScenarioConfig::s1(),
                }],
                noise_sweep: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
                    .iter()
                    .map(|mm| NoisePoint {
                        sigma_flow: mm * 1e-3,
                        ..NoisePoint::default()
                    })
                    .collect(),
                known_flow_counts: vec![1, 2, 3, 5, 10, 20, 50],
                seeds,
                solve: SolveOptions::default(),
                rho: BlockWeights::default(),
                known_pose_modes: vec![KnownPoseMode::None],
                ambiguity_inits: 4,
                ambiguity_max_k: 2,
            },
            3 => {
                let config = ScenarioConfig::s1();
                let radius = config.characteristic_radius();
                let noise = NoisePoint {
                    sigma_point: sigma_for_add(1e-3),
                    sigma_flow: sigma_for_add(1e-3),
                    ..NoisePoint::default()
                }
                .with_pose_noise(1e-3, radius);
                ExperimentSpec {
                    version: 1,
                    experiment,
                    scenarios: vec![NamedScenario {
                        name: "s1".into(),
                        config,
                    }],
                    noise_sweep: vec![noise],
                    known_flow_counts: vec![1, 2, 5, 10, 20, 35, 50],
                    seeds,
                    solve: SolveOptions::default(),
                    rho: BlockWeights::default(),
                    known_pose_modes: vec![KnownPoseMode::None],
                    ambiguity_inits: 0,
                    ambiguity_max_k: usize::MAX,
                }
            }
            other => return Err(RunError::BadExperiment(other)),
        };
        Ok(spec)
    }

    /// Timing sweep: experiment-3 measures at fixed iteration count over
    /// increasing point counts.
    pub fn timing_preset() -> Self {
        let mut spec = Self::preset(3).expect("experiment 3 exists");
        spec.scenarios = [50, 100, 200, 500]
            .iter()
            .map(|&n| {
                let mut config = ScenarioConfig::s1();
                config.n_points = n;
                NamedScenario {
                    name: format!("s1_n{n}"),
                    config,
                }
            })
            .collect();
        spec.known_flow_counts = vec![5];
        spec.seeds = vec![0, 1, 2];
        spec.solve.max_iterations = 15;
        spec
    }

    fn validate(&self) -> Result<(), RunError> {
        Self::measure_mask(self.experiment)?;
        if self.scenarios.is_empty() {
            return Err(RunError::EmptySweep("scenarios"));
        }
        if self.noise_sweep.is_empty() {
            return Err(RunError::EmptySweep("noise_sweep"));
        }
        if self.known_flow_counts.is_empty() {
            return Err(RunError::EmptySweep("known_flow_counts"));
        }
        if self.seeds.is_empty() {
            return Err(RunError::EmptySweep("seeds"));
        }
        if self.known_pose_modes.is_empty() {
            return Err(RunError::EmptySweep("known_pose_modes"));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Identity init plus seeded random tangent perturbations.
pub fn ambiguity_inits(base: &ParameterSet<f64>, count: usize, seed: u64) -> Vec<ParameterSet<f64>> {
    let mut inits = vec![base.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0xA5B1))
        ;
    let scale = 0.05;
    for _ in 1..count {
        let mut init = base.clone();
        for k in 0..4 {
            let fixed = match k {
                0 => init.fixed.x1,
                1 => init.fixed.x2,
                2 => init.fixed.x3,
                _ => init.fixed.x4,
            };
            if fixed {
                continue;
            }
            let mut v = || {
                Vec3::new(
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-scale..scale),
                )
            };
            let delta = TangentDelta::new(v(), v());
            *init.pose_mut(k) = init.pose(k).retract(&delta);
        }
        inits.push(init);
    }
    inits
}

struct RunInput<'a> {
    spec: &'a ExperimentSpec,
    scenario: &'a NamedScenario,
    mode: KnownPoseMode,
    noise_index: usize,
    noise: NoisePoint,
    known_flow_count: usize,
    seed: u64,
    sweep_index: usize,
}

fn run_single(input: &RunInput<'_>) -> Result<ResultRow, RunError> {
    let spec = input.spec;
    let build_start = std::time::Instant::now();

    let mut scenario_config = input.scenario.config.clone();
    scenario_config.seed = splitmix64(input.seed ^ scenario_config.seed);
    let world = generate(&scenario_config)?;
    let exact = derive_measures(&world)?;
    let truth = ParameterSet::from_measures(&exact).expect("complete exact measures");
    let n = exact.n_points().expect("nonempty overlap");

    let noise_spec = NoiseSpec {
        sigma_point: input.noise.sigma_point,
        sigma_flow: input.noise.sigma_flow,
        sigma_trans: input.noise.sigma_trans,
        sigma_rot: input.noise.sigma_rot,
        seed: splitmix64(input.seed.wrapping_add(0x51ED) ^ (input.noise_index as u64)),
    };
    let (noisy_full, input_add) = perturb_measures(&exact, &noise_spec);

    let mask = ExperimentSpec::measure_mask(spec.experiment)?;
    let measures = noisy_full.restricted(mask);

    let mut config = ProblemConfig::from_measures(&measures)?;
    config.rho = spec.rho;
    let k = input.known_flow_count.min(n);
    if config.active.ks5 {
        config.ks5_points = (0..k).collect();
    }

    let mut init = ParameterSet::identity(n);
    if input.mode == KnownPoseMode::FixedParam {
        if let Some(m3) = &measures.m3 {
            init.x3 = *m3;
            init.fixed.x3 = true;
            config.active.ks3 = false;
        }
    }
    let build_ms = build_start.elapsed().as_secs_f64() * 1e3;

    let report = solve(&measures, &config, &init, &spec.solve)?;

    // Output errors against the exact ground truth, probed at the scene
    // points expressed in each pose's source frame.
    let coords = |points: &Option<Vec<mvflow_core::Point3<f64>>>| -> Vec<Vec3<f64>> {
        points
            .as_ref()
            .map(|v| v.iter().map(|p| p.coords).collect())
            .unwrap_or_default()
    };
    let probes = [
        coords(&exact.m7),
        coords(&exact.m9),
        coords(&exact.m8),
        coords(&exact.m9),
    ];
    let mut add_out = [f64::NAN; 4];
    for pose_index in 0..4 {
        add_out[pose_index] = add_transform(
            truth.pose(pose_index),
            report.params.pose(pose_index),
            &probes[pose_index],
        )
        .unwrap_or(f64::NAN);
    }
    let add_out_sf = add_flow(&truth.x5, &report.params.x5).unwrap_or(f64::NAN);

    let ambiguity: Option<AmbiguityReport> =
        if spec.ambiguity_inits >= 2 && k <= spec.ambiguity_max_k {
            let inits = ambiguity_inits(&init, spec.ambiguity_inits, input.seed);
            Some(detect_ambiguity(&measures, &config, &spec.solve, &inits)?)
        } else {
            None
        };

    Ok(ResultRow {
        experiment: spec.experiment,
        scenario: input.scenario.name.clone(),
        known_pose_mode: input.mode.to_string(),
        seed: input.seed,
        sweep_index: input.sweep_index,
        noise_index: input.noise_index,
        sigma_point: input.noise.sigma_point,
        sigma_flow: input.noise.sigma_flow,
        sigma_trans: input.noise.sigma_trans,
        sigma_rot: input.noise.sigma_rot,
        known_flow_count: k,
        n_points: n,
        add_in_da: input_add.add_in_da,
        add_in_tf: input_add.add_in_tf,
        add_in_sf: input_add.add_in_sf,
        add_out_x1: add_out[0],
        add_out_x2: add_out[1],
        add_out_x3: add_out[2],
        add_out_x4: add_out[3],
        add_out_sf,
        cost_initial: report.initial_cost,
        cost_final: report.final_cost,
        iterations: report.iterations,
        termination: report.termination.to_string(),
        build_ms,
        solve_ms: report.wall_time_ms,
        min_eigenvalue: report.rank.map(|r| r.min_eigenvalue),
        max_eigenvalue: report.rank.map(|r| r.max_eigenvalue),
        ambiguity,
    })
}

/// Run the full sweep. Rows are ordered by sweep index regardless of the
/// number of worker threads; solver failures become rows with a failure
/// termination instead of aborting the sweep.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<Vec<ResultRow>, RunError> {
    spec.validate()?;

    let mut inputs = Vec::new();
    let mut sweep_index = 0;
    for scenario in &spec.scenarios {
        for &mode in &spec.known_pose_modes {
            for (noise_index, &noise) in spec.noise_sweep.iter().enumerate() {
                for &count in &spec.known_flow_counts {
                    for &seed in &spec.seeds {
                        inputs.push(RunInput {
                            spec,
                            scenario,
                            mode,
                            noise_index,
                            noise,
                            known_flow_count: count,
                            seed,
                            sweep_index,
                        });
                    }
                    sweep_index += 1;
                }
            }
        }
    }

    let rows: Result<Vec<ResultRow>, RunError> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| inputs.par_iter().map(run_single).collect())
    } else {
        inputs.iter().map(run_single).collect()
    };
    rows
}
