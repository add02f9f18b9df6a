//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test -p mvflow-harness --test acceptance --
//! --nocapture` to see the lines.

use std::time::Instant;

use mvflow_core::geometry::{Pose, Vec3};
use mvflow_core::residuals::{BlockSet, ParameterSet, ProblemConfig};
use mvflow_core::solver::{
    apply_step, dense_jacobian, eliminate_flow_blocks, finite_difference_jacobian, linearize,
    solve, solve_dense, DerivativeMode, SolveOptions, FD_ABS_TOL, FD_REL_TOL,
};
use mvflow_core::synth::{derive_measures, generate, GroundTruthWorld, ScenarioConfig};
use mvflow_harness::experiment::ambiguity_inits;
use mvflow_harness::{
    detect_ambiguity, run_experiment, ExperimentSpec, KnownPoseMode, NamedScenario, NoisePoint,
    ResultRow, Verdict,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SEEDS: std::ops::Range<u64> = 0..10;

fn verdict_line(criterion: &str, passed: bool, detail: &str) -> bool {
    let status = if passed { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {status} {criterion}: {detail}");
    passed
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Means and stds of a column grouped by sweep index, ordered by sweep.
fn by_sweep(rows: &[ResultRow], field: impl Fn(&ResultRow) -> f64) -> Vec<(f64, f64)> {
    let mut indices: Vec<usize> = rows.iter().map(|r| r.sweep_index).collect();
    indices.sort_unstable();
    indices.dedup();
    indices
        .into_iter()
        .map(|i| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.sweep_index == i)
                .map(&field)
                .collect();
            (mean(&values), std_dev(&values))
        })
        .collect()
}

/// Non-decreasing within one standard deviation at each step.
fn monotone_up(series: &[(f64, f64)]) -> bool {
    series
        .windows(2)
        .all(|w| w[1].0 >= w[0].0 - w[0].1.max(w[1].1))
}

fn exact_recovery_spec(experiment: u8) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(experiment).unwrap();
    let mut scenario = ScenarioConfig::s1();
    scenario.n_points = 100;
    spec.scenarios = vec![NamedScenario {
        name: "s1".into(),
        config: scenario,
    }];
    spec.noise_sweep = vec![NoisePoint::zero()];
    spec.seeds = SEEDS.collect();
    spec.ambiguity_inits = 0;
    if experiment == 1 {
        spec.known_pose_modes = vec![KnownPoseMode::FixedParam];
    }
    if experiment == 3 {
        spec.known_flow_counts = vec![20];
    }
    spec
}

#[test]
fn criterion_1_exact_recovery() {
    // Noise-free S1-class scenarios, 10 seeds, n = 100: experiment-1 and
    // experiment-3 configurations recover all free parameters with
    // ADD_out <= 1e-6 m and final cost <= 1e-15, in <= 1 s per run.
    let mut worst_add = 0.0f64;
    let mut worst_cost = 0.0f64;
    let mut worst_ms = 0.0f64;
    for experiment in [1u8, 3] {
        let spec = exact_recovery_spec(experiment);
        let rows = run_experiment(&spec, 1).unwrap();
        assert_eq!(rows.len(), 10);
        for row in rows {
            let mut adds = vec![row.add_out_x1, row.add_out_x2, row.add_out_x4, row.add_out_sf];
            if experiment == 3 {
                adds.push(row.add_out_x3);
            }
            for add in adds {
                worst_add = worst_add.max(add);
            }
            worst_cost = worst_cost.max(row.cost_final);
            worst_ms = worst_ms.max(row.build_ms + row.solve_ms);
        }
    }
    let passed = worst_add <= 1e-6 && worst_cost <= 1e-15 && worst_ms <= 1000.0;
    assert!(
        verdict_line(
            "1 exact-recovery",
            passed,
            &format!(
                "worst ADD_out {worst_add:.2e} m (<=1e-6), worst cost {worst_cost:.2e} \
                 (<=1e-15), worst runtime {worst_ms:.0} ms (<=1000)"
            ),
        ),
        "exact recovery failed"
    );
}

#[test]
fn criterion_2_experiment_1_noise_sweep() {
    // ADD_inDA spanning 0-10 mm with exact m3: x4 and x5 stay sub-mm at
    // every sweep point while x1/x2 grow monotonically (within 1 std);
    // whole sweep under a minute.
    let mut spec = ExperimentSpec::preset(1).unwrap();
    spec.scenarios.truncate(1); // moving-camera preset
    spec.known_pose_modes = vec![KnownPoseMode::FixedParam];
    spec.noise_sweep = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
        .iter()
        .map(|mm| NoisePoint::for_da_add(mm * 1e-3))
        .collect();
    spec.seeds = SEEDS.collect();

    let started = Instant::now();
    let rows = run_experiment(&spec, 1).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    let add_in = by_sweep(&rows, |r| r.add_in_da);
    let x1 = by_sweep(&rows, |r| r.add_out_x1);
    let x2 = by_sweep(&rows, |r| r.add_out_x2);
    let x4 = by_sweep(&rows, |r| r.add_out_x4);
    let sf = by_sweep(&rows, |r| r.add_out_sf);

    let covers_range = add_in.last().unwrap().0 >= 9.0e-3;
    let sub_mm = x4.iter().all(|(m, _)| *m < 1e-3) && sf.iter().all(|(m, _)| *m < 1e-3);
    let monotone = monotone_up(&x1) && monotone_up(&x2);
    let fast = elapsed < 60.0;
    let passed = covers_range && sub_mm && monotone && fast;
    assert!(
        verdict_line(
            "2 experiment-1 reproduction",
            passed,
            &format!(
                "ADD_inDA up to {:.1} mm; max mean ADD_out x4 {:.3} mm, x5 {:.3} mm (<1); \
                 x1/x2 monotone: {monotone}; sweep {elapsed:.1} s (<60)",
                add_in.last().unwrap().0 * 1e3,
                x4.iter().map(|(m, _)| *m).fold(0.0, f64::max) * 1e3,
                sf.iter().map(|(m, _)| *m).fold(0.0, f64::max) * 1e3,
            ),
        ),
        "experiment-1 reproduction failed"
    );
}

/// Rewrite points 0 and 1 so that both trajectories lie on one line.
fn engineer_colinear_pair(world: &mut GroundTruthWorld) {
    let center = Vec3::new(0.0, 0.0, 0.118);
    let dir = Vec3::new(0.8, 0.55, 0.2).normalized();
    world.points_t0[0] = center + dir.scale(-0.010);
    world.points_t1[0] = world.points_t0[0] + dir.scale(0.003);
    world.points_t0[1] = center + dir.scale(0.010);
    world.points_t1[1] = world.points_t0[1] + dir.scale(0.002);
    world.visible[0] = true;
    world.visible[1] = true;
}

fn exp2_ambiguity(seed: u64, colinear: bool) -> mvflow_harness::AmbiguityReport {
    let mut config = ScenarioConfig::s1();
    config.seed = seed.wrapping_add(300);
    let mut world = generate(&config).unwrap();
    if colinear {
        engineer_colinear_pair(&mut world);
    }
    let exact = derive_measures(&world).unwrap();
    let measures = exact.restricted(&["m5", "m6", "m7", "m8", "m9"]);
    let n = measures.n_points().unwrap();
    let mut problem = ProblemConfig::from_measures(&measures).unwrap();
    problem.ks5_points = vec![0, 1];
    let init = ParameterSet::identity(n);
    let inits = ambiguity_inits(&init, 4, seed);
    detect_ambiguity(&measures, &problem, &SolveOptions::default(), &inits).unwrap()
}

#[test]
fn criterion_3_experiment_2_reproduction() {
    // Part 1: k = 2 non-colinear known flows -> unique solution
    // (multi-init disagreement <= 1e-6 m at zero noise).
    let mut worst_noncolinear = 0.0f64;
    for seed in SEEDS {
        let report = exp2_ambiguity(seed, false);
        worst_noncolinear = worst_noncolinear.max(report.max_disagreement());
    }
    let unique_ok = worst_noncolinear <= 1e-6;

    // Part 2: k = 2 colinear trajectories -> ambiguity verdict.
    let mut colinear_flagged = 0;
    for seed in SEEDS {
        if exp2_ambiguity(seed, true).verdict == Verdict::Ambiguous {
            colinear_flagged += 1;
        }
    }
    let colinear_ok = colinear_flagged == 10;

    // Part 3: ADD_outSF grows with sigma_flow over 0-1 mm, monotone
    // within 1 std over 10 seeds (at a well-posed known-flow count).
    let mut spec = ExperimentSpec::preset(2).unwrap();
    spec.known_flow_counts = vec![10];
    spec.seeds = SEEDS.collect();
    spec.ambiguity_inits = 0;
    let rows = run_experiment(&spec, 1).unwrap();
    let sf = by_sweep(&rows, |r| r.add_out_sf);
    let monotone = monotone_up(&sf) && sf.last().unwrap().0 > sf.first().unwrap().0;

    let passed = unique_ok && colinear_ok && monotone;
    assert!(
        verdict_line(
            "3 experiment-2 reproduction",
            passed,
            &format!(
                "k=2 non-colinear max disagreement {worst_noncolinear:.2e} m (<=1e-6 required); \
                 k=2 colinear flagged ambiguous {colinear_flagged}/10; \
                 ADD_outSF monotone in sigma_flow: {monotone}"
            ),
        ),
        "experiment-2 reproduction failed (see decisions ledger: k=2 retains a \
         one-dof gauge family regardless of trajectory colinearity)"
    );
}

#[test]
fn criterion_4_experiment_3_stabilization() {
    // 1 mm-order noise on all measures: mean ADD_out over (x3, x4, x5)
    // stabilizes (<10% change between sweep points) beyond k = 20 and is
    // non-increasing within 1 std.
    let mut spec = ExperimentSpec::preset(3).unwrap();
    spec.seeds = SEEDS.collect();
    let rows = run_experiment(&spec, 1).unwrap();

    let combined = by_sweep(&rows, |r| (r.add_out_x3 + r.add_out_x4 + r.add_out_sf) / 3.0);
    let counts = {
        let mut ks: Vec<usize> = rows.iter().map(|r| r.known_flow_count).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    };
    assert_eq!(combined.len(), counts.len());

    let non_increasing = combined
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + w[0].1.max(w[1].1));
    let mut stable_beyond_20 = true;
    let mut max_change = 0.0f64;
    for (pair, ks) in combined.windows(2).zip(counts.windows(2)) {
        if ks[0] >= 20 {
            let change = (pair[1].0 - pair[0].0).abs() / pair[0].0;
            max_change = max_change.max(change);
            stable_beyond_20 &= change < 0.10;
        }
    }
    let passed = non_increasing && stable_beyond_20;
    assert!(
        verdict_line(
            "4 experiment-3 stabilization",
            passed,
            &format!(
                "combined ADD_out(x3,x4,x5) non-increasing: {non_increasing}; \
                 max change beyond k=20: {:.1}% (<10%)",
                max_change * 100.0
            ),
        ),
        "experiment-3 stabilization failed"
    );
}

/// Fixed-iteration timing protocol: run exactly `iterations` damped steps
/// (linearize, eliminate, solve, retract) on an experiment-3 style problem.
fn fixed_iteration_solve_ms(n: usize, iterations: usize, seed: u64) -> f64 {
    let mut scenario = ScenarioConfig::s1();
    scenario.n_points = n;
    scenario.seed = seed;
    let world = generate(&scenario).unwrap();
    let exact = derive_measures(&world).unwrap();
    let noise = mvflow_core::noise::NoiseSpec {
        sigma_point: mvflow_core::noise::sigma_for_add(1e-3),
        sigma_flow: mvflow_core::noise::sigma_for_add(1e-3),
        sigma_trans: 1e-3,
        sigma_rot: mvflow_core::noise::rotation_sigma_for_add(
            1e-3,
            scenario.characteristic_radius(),
        ),
        seed,
    };
    let (measures, _) = mvflow_core::noise::perturb_measures(&exact, &noise);
    let count = measures.n_points().unwrap();
    let mut config = ProblemConfig::from_measures(&measures).unwrap();
    config.ks5_points = (0..5.min(count)).collect();
    let mut params = ParameterSet::identity(count);

    let started = Instant::now();
    let lambda = 1e-6;
    for _ in 0..iterations {
        let lin = linearize(&params, &measures, &config, DerivativeMode::AutoDiff).unwrap();
        let step = eliminate_flow_blocks(&lin, lambda).solve().unwrap();
        params = apply_step(&params, &lin.layout, &step);
    }
    started.elapsed().as_secs_f64() * 1e3
}

fn timing_fit() -> (f64, f64) {
    let ns = [50usize, 100, 200, 500];
    let mut medians = Vec::new();
    for &n in &ns {
        let mut times: Vec<f64> = (0..5)
            .map(|rep| fixed_iteration_solve_ms(n, 12, 1000 + rep))
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(times[times.len() / 2]);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let x_mean = mean(&xs);
    let y_mean = mean(&medians);
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&medians)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&medians)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = medians.iter().map(|y| (y - y_mean).powi(2)).sum();
    (1.0 - ss_res / ss_tot, medians[3])
}

#[test]
fn criterion_5_timing_linear_in_points() {
    // Wall time linear in n (R^2 >= 0.95 over n in {50, 100, 200, 500} at
    // fixed iteration count); the n = 500 full solve lands within an order
    // of magnitude of 15 ms.
    let (mut r_squared, mut t500) = timing_fit();
    if r_squared < 0.95 {
        // One retry to ride out scheduler noise.
        (r_squared, t500) = timing_fit();
    }

    // Absolute bound on a complete n = 500 solve.
    let mut scenario = ScenarioConfig::s1();
    scenario.n_points = 500;
    scenario.seed = 77;
    let world = generate(&scenario).unwrap();
    let exact = derive_measures(&world).unwrap();
    let (measures, _) = mvflow_core::noise::perturb_measures(
        &exact,
        &mvflow_core::noise::NoiseSpec {
            sigma_point: mvflow_core::noise::sigma_for_add(1e-3),
            sigma_flow: mvflow_core::noise::sigma_for_add(1e-3),
            sigma_trans: 1e-3,
            sigma_rot: 0.016,
            seed: 7,
        },
    );
    let n = measures.n_points().unwrap();
    let mut config = ProblemConfig::from_measures(&measures).unwrap();
    config.ks5_points = (0..5).collect();
    let report = solve(
        &measures,
        &config,
        &ParameterSet::identity(n),
        &SolveOptions::default(),
    )
    .unwrap();

    let passed = r_squared >= 0.95 && report.wall_time_ms <= 150.0;
    assert!(
        verdict_line(
            "5 timing",
            passed,
            &format!(
                "R^2 {r_squared:.4} (>=0.95) at fixed iterations; fixed-count n=500 {t500:.1} ms; \
                 full n=500 solve {:.1} ms (<=150, {} iterations)",
                report.wall_time_ms, report.iterations
            ),
        ),
        "timing criterion failed"
    );
}

#[test]
fn criterion_6_experiment_0_ambiguity() {
    // Measures {m1, m2, m6-m9}, zero noise: x1/x2 to 1e-6 while the
    // ambiguity verdict fires on x3/x4/x5, on 10/10 seeds.
    let mut spec = ExperimentSpec::preset(0).unwrap();
    spec.seeds = SEEDS.collect();
    let rows = run_experiment(&spec, 1).unwrap();
    assert_eq!(rows.len(), 10);

    let mut recovered = 0;
    let mut flagged = 0;
    for row in &rows {
        if row.add_out_x1 <= 1e-6 && row.add_out_x2 <= 1e-6 {
            recovered += 1;
        }
        let ambiguity = row.ambiguity.as_ref().expect("ambiguity requested");
        let family_moves = ambiguity.disagreement_poses[2] > 1e-3
            && ambiguity.disagreement_poses[3] > 1e-3
            && ambiguity.disagreement_flows > 1e-3;
        let pinned_agree = ambiguity.disagreement_poses[0] <= 1e-6
            && ambiguity.disagreement_poses[1] <= 1e-6;
        if ambiguity.verdict == Verdict::Ambiguous && family_moves && pinned_agree {
            flagged += 1;
        }
    }
    let passed = recovered == 10 && flagged == 10;
    assert!(
        verdict_line(
            "6 experiment-0 ambiguity",
            passed,
            &format!(
                "x1/x2 recovered to 1e-6 on {recovered}/10 seeds; \
                 x3/x4/x5 flagged ambiguous on {flagged}/10 seeds"
            ),
        ),
        "experiment-0 ambiguity criterion failed"
    );
}

#[test]
fn criterion_7_derivative_suite() {
    // Block Jacobians match central finite differences within
    // max(1e-5 abs, 1e-4 rel) over >= 100 randomized points, for both
    // derivative modes; elimination equals the dense path within 1e-8 on
    // n <= 50.
    let mut scenario = ScenarioConfig::s1();
    scenario.n_points = 12;
    let world = generate(&scenario).unwrap();
    let measures = derive_measures(&world).unwrap();
    let n = measures.n_points().unwrap();
    let config = ProblemConfig::all_blocks(n);
    let mut rng = StdRng::seed_from_u64(2024);

    let mut evaluated_points = 0;
    let mut derivative_ok = true;
    for _ in 0..10 {
        let mut params = ParameterSet::from_measures(&measures).unwrap();
        for k in 0..4 {
            let delta = mvflow_core::geometry::TangentDelta::new(
                Vec3::new(
                    rng.gen_range(-0.15..0.15),
                    rng.gen_range(-0.15..0.15),
                    rng.gen_range(-0.15..0.15),
                ),
                Vec3::new(
                    rng.gen_range(-0.15..0.15),
                    rng.gen_range(-0.15..0.15),
                    rng.gen_range(-0.15..0.15),
                ),
            );
            *params.pose_mut(k) = params.pose(k).retract(&delta);
        }
        for flow in &mut params.x5 {
            flow.delta = flow.delta
                + Vec3::new(
                    rng.gen_range(-0.01..0.01),
                    rng.gen_range(-0.01..0.01),
                    rng.gen_range(-0.01..0.01),
                );
        }
        evaluated_points += n;
        let fd = finite_difference_jacobian(&params, &measures, &config).unwrap();
        for mode in [DerivativeMode::AutoDiff, DerivativeMode::Analytic] {
            let lin = linearize(&params, &measures, &config, mode).unwrap();
            let dense = dense_jacobian(&lin);
            derivative_ok &= dense
                .iter()
                .zip(fd.iter())
                .all(|(a, b)| (a - b).abs() <= FD_ABS_TOL.max(FD_REL_TOL * b.abs()));
        }
    }

    // Elimination vs dense on n <= 50.
    let mut scenario = ScenarioConfig::s1();
    scenario.n_points = 50;
    let world = generate(&scenario).unwrap();
    let measures = derive_measures(&world).unwrap();
    let n = measures.n_points().unwrap();
    let config = ProblemConfig::all_blocks(n);
    let params = ParameterSet::identity(n);
    let lin = linearize(&params, &measures, &config, DerivativeMode::AutoDiff).unwrap();
    let schur = eliminate_flow_blocks(&lin, 1e-4).solve().unwrap();
    let dense = solve_dense(&lin, 1e-4).unwrap();
    let step_diff = (schur - dense.clone()).amax() / dense.amax().max(1e-30);
    let elimination_ok = step_diff <= 1e-8;

    let passed = derivative_ok && evaluated_points >= 100 && elimination_ok;
    assert!(
        verdict_line(
            "7 derivative suite",
            passed,
            &format!(
                "{evaluated_points} randomized points within max(1e-5, 1e-4 rel): \
                 {derivative_ok}; elimination vs dense relative step difference \
                 {step_diff:.2e} (<=1e-8)"
            ),
        ),
        "derivative suite failed"
    );
}

#[test]
fn criterion_8_oracle_equivalence() {
    // DA-only x1 solve equals the closed-form rigid alignment within 1e-9
    // on noisy, non-collinear correspondences; every generated world
    // satisfies the kinematic loop identities within 1e-12.
    let scenario = ScenarioConfig::s1();
    let world = generate(&scenario).unwrap();
    let exact = derive_measures(&world).unwrap();
    let (noisy, _) = mvflow_core::noise::perturb_measures(
        &exact,
        &mvflow_core::noise::NoiseSpec {
            sigma_point: 2e-3,
            ..mvflow_core::noise::NoiseSpec::zero(9)
        },
    );
    let n = noisy.n_points().unwrap();

    let mut config = ProblemConfig::all_blocks(n);
    config.active = BlockSet::none();
    config.active.da0 = true;
    config.ks5_points.clear();
    let mut init = ParameterSet::identity(n);
    init.fixed.x2 = true;
    init.fixed.x3 = true;
    init.fixed.x4 = true;
    init.fixed.x5 = vec![true; n];
    let report = solve(&noisy, &config, &init, &SolveOptions::default()).unwrap();

    let src: Vec<Vec3<f64>> = noisy.m7.as_ref().unwrap().iter().map(|p| p.coords).collect();
    let dst: Vec<Vec3<f64>> = noisy.m6.as_ref().unwrap().iter().map(|p| p.coords).collect();
    let closed_form: Pose<f64> =
        mvflow_core::align::rigid_align(&src, &dst, report.params.x1.frames).unwrap();
    let probes: Vec<Vec3<f64>> = src.clone();
    let alignment_gap =
        mvflow_core::metrics::add_transform(&closed_form, &report.params.x1, &probes).unwrap();
    let alignment_ok = alignment_gap <= 1e-9;

    // Kinematic loop identities on every generated world.
    let mut loops_ok = true;
    let mut worst_loop = 0.0f64;
    for seed in SEEDS {
        for base in [ScenarioConfig::s1(), ScenarioConfig::s1_static_a()] {
            let mut config = base;
            config.seed = seed.wrapping_add(9000);
            let world = generate(&config).unwrap();
            let m = derive_measures(&world).unwrap();
            let (m1, m2, m3, m4) = (
                m.m1.as_ref().unwrap(),
                m.m2.as_ref().unwrap(),
                m.m3.as_ref().unwrap(),
                m.m4.as_ref().unwrap(),
            );
            let chained = m3.inverse().compose(m1).compose(m4);
            worst_loop = worst_loop.max(chained.local(m2).norm());
            let (m5, m6, m7, m8, m9) = (
                m.m5.as_ref().unwrap(),
                m.m6.as_ref().unwrap(),
                m.m7.as_ref().unwrap(),
                m.m8.as_ref().unwrap(),
                m.m9.as_ref().unwrap(),
            );
            let m4_inv = m4.inverse();
            for i in 0..m6.len() {
                worst_loop = worst_loop.max(m6[i].sub(&m1.apply(&m7[i])).norm());
                worst_loop = worst_loop.max(m8[i].sub(&m2.apply(&m9[i])).norm());
                let advanced = m7[i].advance(&m5[i]);
                worst_loop = worst_loop.max(m9[i].sub(&m4_inv.apply(&advanced)).norm());
            }
            loops_ok &= worst_loop <= 1e-12;
        }
    }

    let passed = alignment_ok && loops_ok;
    assert!(
        verdict_line(
            "8 oracle equivalence",
            passed,
            &format!(
                "DA-only solve vs closed-form alignment: {alignment_gap:.2e} m (<=1e-9); \
                 worst kinematic identity residual {worst_loop:.2e} (<=1e-12)"
            ),
        ),
        "oracle equivalence failed"
    );
}
