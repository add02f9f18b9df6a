//! Damped Gauss-Newton (Levenberg-Marquardt) over the manifold-parameterized
//! problem.
//!
//! Steps solve `(H + λI) δ = -g` on the free tangent space, by flow-block
//! elimination by default. λ shrinks on accepted steps and grows on
//! rejections; the accepted-cost trace never increases. A solve owns its
//! inputs for its duration; concurrent solves on distinct problems are safe.

mod linearize;
mod normal;

pub use linearize::{
    apply_step, dense_jacobian, finite_difference_jacobian, gradient, linearize,
    linearize_parallel, stacked_residuals, Linearization, ParamBlock, ParamLayout, RowBlock,
    FD_ABS_TOL, FD_REL_TOL, FD_STEP,
};
pub use normal::{
    dense_normal, eliminate_flow_blocks, rank_diagnostics, solve_dense, RankDiagnostics,
    ReducedSystem,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::rigid_align;
use crate::residuals::{
    total_cost, BlockKind, MeasureSet, ParameterSet, ProblemConfig, ProblemError,
};
use crate::scalar::Real;

/// Scalar the solver's linear algebra runs on (`f32`/`f64`).
pub trait SolverScalar: Real + nalgebra::RealField + Send + Sync {}
impl<T: Real + nalgebra::RealField + Send + Sync> SolverScalar for T {}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("non-finite residual or derivative in {block}{}", point_suffix(*point))]
    NonFinite {
        block: BlockKind,
        point: Option<usize>,
    },
    #[error(
        "derivative check failed in {block}{} at ({row}, {col}): {computed} vs finite difference {finite_difference}",
        point_suffix(*point)
    )]
    DerivativeMismatch {
        block: BlockKind,
        point: Option<usize>,
        row: usize,
        col: usize,
        computed: f64,
        finite_difference: f64,
    },
}

fn point_suffix(point: Option<usize>) -> String {
    point.map(|i| format!(" (point {i})")).unwrap_or_default()
}

/// How residual Jacobians are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DerivativeMode {
    /// Forward-mode dual numbers through the residual definitions.
    #[default]
    AutoDiff,
    /// Hand-derived block Jacobians.
    Analytic,
    /// AutoDiff, verified against central finite differences at every
    /// linearization; errors on mismatch. Diagnostic use.
    FiniteDifferenceCheck,
}

/// Which linear solver handles the normal equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LinearSolverKind {
    /// Eliminate per-point flow blocks, solve the reduced pose system.
    #[default]
    SchurElimination,
    /// Assemble and factor the full normal matrix. Reference path.
    Dense,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Relative cost-decrease threshold on accepted steps.
    pub cost_tolerance: f64,
    /// Max-norm threshold on the gradient.
    pub gradient_tolerance: f64,
    pub initial_lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_max: f64,
    pub derivative_mode: DerivativeMode,
    pub linear_solver: LinearSolverKind,
    /// Compute undamped normal-matrix eigenvalue extremes at the solution.
    pub compute_rank_diagnostics: bool,
    /// Initialize x1/x2 from the closed-form alignment of the DA clouds.
    pub warm_start_da: bool,
    /// Evaluate per-point residual blocks in parallel. Results are
    /// identical to the sequential path; off by default to keep single-run
    /// timings single-threaded.
    pub parallel_residuals: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 100,
            cost_tolerance: 1e-12,
            gradient_tolerance: 1e-10,
            initial_lambda: 1e-4,
            lambda_up: 10.0,
            lambda_down: 10.0,
            lambda_max: 1e32,
            derivative_mode: DerivativeMode::default(),
            linear_solver: LinearSolverKind::default(),
            compute_rank_diagnostics: false,
            warm_start_da: false,
            parallel_residuals: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    CostTolerance,
    GradientTolerance,
    MaxIterations,
    /// Factorization failure or no acceptable step at maximum damping.
    NumericalFailure,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationReason::CostTolerance => "cost_tolerance",
            TerminationReason::GradientTolerance => "gradient_tolerance",
            TerminationReason::MaxIterations => "max_iterations",
            TerminationReason::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<S: SolverScalar> {
    pub params: ParameterSet<S>,
    pub initial_cost: S,
    pub final_cost: S,
    /// Accepted steps.
    pub iterations: usize,
    pub termination: TerminationReason,
    pub wall_time_ms: f64,
    /// Costs of the accepted iterates, starting at the initial cost.
    pub cost_trace: Vec<S>,
    pub rank: Option<RankDiagnostics>,
    pub init_description: String,
}

fn warm_start<S: SolverScalar>(params: &mut ParameterSet<S>, measures: &MeasureSet<S>) -> bool {
    let mut applied = false;
    if !params.fixed.x1 {
        if let (Some(m6), Some(m7)) = (&measures.m6, &measures.m7) {
            let src: Vec<_> = m7.iter().map(|p| p.coords).collect();
            let dst: Vec<_> = m6.iter().map(|p| p.coords).collect();
            if let Some(fit) = rigid_align(&src, &dst, params.x1.frames) {
                params.x1 = fit;
                applied = true;
            }
        }
    }
    if !params.fixed.x2 {
        if let (Some(m8), Some(m9)) = (&measures.m8, &measures.m9) {
            let src: Vec<_> = m9.iter().map(|p| p.coords).collect();
            let dst: Vec<_> = m8.iter().map(|p| p.coords).collect();
            if let Some(fit) = rigid_align(&src, &dst, params.x2.frames) {
                params.x2 = fit;
                applied = true;
            }
        }
    }
    applied
}

/// Minimize the weighted objective from `init`.
pub fn solve<S: SolverScalar>(
    measures: &MeasureSet<S>,
    config: &ProblemConfig,
    init: &ParameterSet<S>,
    options: &SolveOptions,
) -> Result<SolveReport<S>, SolveError> {
    let start = Instant::now();
    config.validate(measures)?;

    let mut params = init.clone();
    let mut init_description = String::from("caller-provided");
    if options.warm_start_da && warm_start(&mut params, measures) {
        init_description.push_str(" + closed-form DA warm start on x1/x2");
    }

    let relinearize = |p: &ParameterSet<S>| {
        if options.parallel_residuals {
            linearize_parallel(p, measures, config, options.derivative_mode)
        } else {
            linearize(p, measures, config, options.derivative_mode)
        }
    };

    let mut lin = relinearize(&params)?;
    let initial_cost = lin.cost;
    let mut cost = initial_cost;
    let mut trace = vec![cost];
    let mut lambda = S::of(options.initial_lambda);
    let lambda_max = S::of(options.lambda_max);
    let cost_tol = S::of(options.cost_tolerance);
    let grad_tol = S::of(options.gradient_tolerance);
    let mut iterations = 0;
    let termination;

    'outer: loop {
        if lin.layout.total_cols() == 0 {
            termination = TerminationReason::GradientTolerance;
            break;
        }
        let g = gradient(&lin);
        if g.amax() <= grad_tol {
            termination = TerminationReason::GradientTolerance;
            break;
        }
        if iterations >= options.max_iterations {
            termination = TerminationReason::MaxIterations;
            break;
        }

        loop {
            if lambda > lambda_max {
                termination = TerminationReason::NumericalFailure;
                break 'outer;
            }
            let step = match options.linear_solver {
                LinearSolverKind::SchurElimination => eliminate_flow_blocks(&lin, lambda).solve(),
                LinearSolverKind::Dense => solve_dense(&lin, lambda),
            };
            let step = match step {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    lambda *= S::of(options.lambda_up);
                    continue;
                }
            };
            let candidate = apply_step(&params, &lin.layout, &step);
            let candidate_cost = total_cost(&candidate, measures, config)?;
            if candidate_cost < cost {
                params = candidate;
                lin = relinearize(&params)?;
                let previous = cost;
                cost = lin.cost;
                trace.push(cost);
                iterations += 1;
                lambda =
                    num_traits::Float::max(lambda / S::of(options.lambda_down), S::of(1e-18));
                if previous - cost <= cost_tol * previous {
                    termination = TerminationReason::CostTolerance;
                    break 'outer;
                }
                break;
            }
            // Rejected, but the attainable change is below the cost
            // tolerance: converged at the numerical floor.
            if num_traits::Float::abs(candidate_cost - cost) <= cost_tol * cost {
                termination = TerminationReason::CostTolerance;
                break 'outer;
            }
            lambda *= S::of(options.lambda_up);
        }
    }

    let rank = options
        .compute_rank_diagnostics
        .then(|| rank_diagnostics(&lin));
    debug_assert!(
        trace.windows(2).all(|w| w[1] <= w[0]),
        "accepted-cost trace must be non-increasing"
    );
    Ok(SolveReport {
        params,
        initial_cost,
        final_cost: cost,
        iterations,
        termination,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        cost_trace: trace,
        rank,
        init_description,
    })
}
