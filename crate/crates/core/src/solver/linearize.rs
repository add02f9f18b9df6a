//! Residual stacking and block-sparse Jacobians over tangent coordinates.
//!
//! Rows follow the fixed residual order (DA0 points, DA1 points, SFT_A
//! points, SFT_B points, KC, KS1..KS5); columns follow the parameter order
//! [x1(6), x2(6), x3(6), x4(6), x5_1(3), .., x5_n(3)] with fixed blocks
//! removed. Pose blocks use the `[trans, rot]` tangent convention. Rows and
//! Jacobians carry the sqrt of their block's loss scale, so the stacked
//! system is plain least squares.

use nalgebra::{DMatrix, DVector, Matrix3};
use rayon::prelude::*;

use crate::dual::Dual;
use crate::geometry::{FlowVector, Pose, TangentDelta, Vec3};
use crate::residuals::{
    residual_da0, residual_da1, residual_kc, residual_ks_flow, residual_ks_pose, residual_sft_a,
    residual_sft_b, BlockKind, MeasureSet, ParameterSet, ProblemConfig,
};
use crate::scalar::Real;

use super::{DerivativeMode, SolveError, SolverScalar};

/// Central finite-difference step in tangent space.
pub const FD_STEP: f64 = 1e-6;
/// Derivative check thresholds: max(abs, rel * scale).
pub const FD_ABS_TOL: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;

/// A parameter block: one of the four poses (6 columns) or a per-point flow
/// (3 columns).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamBlock {
    Pose(usize),
    Flow(usize),
}

/// Column bookkeeping for the free parameters.
#[derive(Clone, Debug)]
pub struct ParamLayout {
    pose_offsets: [Option<usize>; 4],
    flow_offsets: Vec<Option<usize>>,
    pose_cols: usize,
    total_cols: usize,
}

impl ParamLayout {
    pub fn new(params: &ParameterSet<f64>) -> Self {
        Self::from_fixed(
            [
                params.fixed.x1,
                params.fixed.x2,
                params.fixed.x3,
                params.fixed.x4,
            ],
            &params.fixed.x5,
        )
    }

    pub fn from_fixed(pose_fixed: [bool; 4], flow_fixed: &[bool]) -> Self {
        let mut pose_offsets = [None; 4];
        let mut col = 0;
        for (offset, fixed) in pose_offsets.iter_mut().zip(pose_fixed) {
            if !fixed {
                *offset = Some(col);
                col += 6;
            }
        }
        let pose_cols = col;
        let flow_offsets = flow_fixed
            .iter()
            .map(|fixed| {
                if *fixed {
                    None
                } else {
                    let offset = col;
                    col += 3;
                    Some(offset)
                }
            })
            .collect();
        ParamLayout {
            pose_offsets,
            flow_offsets,
            pose_cols,
            total_cols: col,
        }
    }

    pub fn offset(&self, block: ParamBlock) -> Option<usize> {
        match block {
            ParamBlock::Pose(i) => self.pose_offsets[i],
            ParamBlock::Flow(i) => self.flow_offsets[i],
        }
    }

    pub fn block_dim(block: ParamBlock) -> usize {
        match block {
            ParamBlock::Pose(_) => 6,
            ParamBlock::Flow(_) => 3,
        }
    }

    /// Columns of the pose segment (flows start here).
    pub fn pose_cols(&self) -> usize {
        self.pose_cols
    }

    pub fn total_cols(&self) -> usize {
        self.total_cols
    }

    pub fn n_free_flows(&self) -> usize {
        self.flow_offsets.iter().flatten().count()
    }

    /// Free flows in column order: (point index, column offset).
    pub fn free_flows(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.flow_offsets
            .iter()
            .enumerate()
            .filter_map(|(i, offset)| offset.map(|o| (i, o)))
    }
}

/// Retract a full tangent step onto a parameter set.
pub fn apply_step<S: SolverScalar>(
    params: &ParameterSet<S>,
    layout: &ParamLayout,
    step: &DVector<S>,
) -> ParameterSet<S> {
    assert_eq!(step.len(), layout.total_cols());
    let mut out = params.clone();
    for pose_index in 0..4 {
        if let Some(offset) = layout.offset(ParamBlock::Pose(pose_index)) {
            let delta = TangentDelta::new(
                Vec3::new(step[offset], step[offset + 1], step[offset + 2]),
                Vec3::new(step[offset + 3], step[offset + 4], step[offset + 5]),
            );
            *out.pose_mut(pose_index) = out.pose(pose_index).retract(&delta);
        }
    }
    for (i, offset) in layout.free_flows() {
        let delta = Vec3::new(step[offset], step[offset + 1], step[offset + 2]);
        out.x5[i] = FlowVector::new(out.x5[i].delta + delta, out.x5[i].frame);
    }
    out
}

/// One residual row block and its Jacobian entries.
#[derive(Clone, Debug)]
pub struct RowBlock<S> {
    pub kind: BlockKind,
    pub point: Option<usize>,
    /// Offset into the stacked residual vector.
    pub row: usize,
    pub dim: usize,
    /// Jacobian blocks of the free parameters this row touches.
    pub entries: Vec<(ParamBlock, DMatrix<S>)>,
}

/// Stacked weighted residuals plus block-sparse Jacobian.
#[derive(Clone, Debug)]
pub struct Linearization<S> {
    pub residuals: DVector<S>,
    pub rows: Vec<RowBlock<S>>,
    pub layout: ParamLayout,
    /// Half squared norm of the weighted residuals.
    pub cost: S,
}

/// One residual block instance in stacking order.
#[derive(Clone, Copy, Debug)]
struct Instance {
    kind: BlockKind,
    point: Option<usize>,
    row: usize,
    sqrt_rho: f64,
}

impl Instance {
    fn param_blocks(&self) -> Vec<ParamBlock> {
        match self.kind {
            BlockKind::Da0 => vec![ParamBlock::Pose(0)],
            BlockKind::Da1 => vec![ParamBlock::Pose(1)],
            BlockKind::SftA => vec![
                ParamBlock::Pose(0),
                ParamBlock::Pose(2),
                ParamBlock::Flow(self.point.unwrap()),
            ],
            BlockKind::SftB => vec![
                ParamBlock::Pose(3),
                ParamBlock::Flow(self.point.unwrap()),
            ],
            BlockKind::Kc => vec![
                ParamBlock::Pose(0),
                ParamBlock::Pose(2),
                ParamBlock::Pose(3),
            ],
            BlockKind::Ks1 => vec![ParamBlock::Pose(0)],
            BlockKind::Ks2 => vec![ParamBlock::Pose(1)],
            BlockKind::Ks3 => vec![ParamBlock::Pose(2)],
            BlockKind::Ks4 => vec![ParamBlock::Pose(3)],
            BlockKind::Ks5 => vec![ParamBlock::Flow(self.point.unwrap())],
        }
    }
}

fn build_instances(n: usize, config: &ProblemConfig) -> (Vec<Instance>, usize) {
    let mut instances = Vec::new();
    let mut row = 0;
    let mut push = |kind: BlockKind, point: Option<usize>, dim: usize, rho: f64, row: &mut usize| {
        instances.push(Instance {
            kind,
            point,
            row: *row,
            sqrt_rho: rho.sqrt(),
        });
        *row += dim;
    };
    for kind in BlockKind::ORDER {
        if !config.active.contains(kind) {
            continue;
        }
        let rho = config.rho.get(kind);
        match kind {
            BlockKind::Da0 | BlockKind::Da1 | BlockKind::SftA | BlockKind::SftB => {
                for i in 0..n {
                    push(kind, Some(i), 3, rho, &mut row);
                }
            }
            BlockKind::Kc | BlockKind::Ks1 | BlockKind::Ks2 | BlockKind::Ks3 | BlockKind::Ks4 => {
                push(kind, None, 6, rho, &mut row);
            }
            BlockKind::Ks5 => {
                for &i in &config.ks5_points {
                    push(kind, Some(i), 3, rho, &mut row);
                }
            }
        }
    }
    (instances, row)
}

/// The values one residual block reads: the four poses and, for per-point
/// blocks, that point's flow. Small and cheap to copy, so column seeding
/// never clones whole parameter sets.
#[derive(Clone, Copy)]
struct BlockArgs<T: Real> {
    poses: [Pose<T>; 4],
    flow: Option<FlowVector<T>>,
}

impl<T: Real> BlockArgs<T> {
    fn from_params(params: &ParameterSet<T>, point: Option<usize>) -> Self {
        BlockArgs {
            poses: [params.x1, params.x2, params.x3, params.x4],
            flow: point.map(|i| params.x5[i]),
        }
    }
}

/// Evaluate one residual block on any scalar type.
fn eval_instance<T: Real>(
    inst: &Instance,
    args: &BlockArgs<T>,
    measures: &MeasureSet<T>,
) -> ([T; 6], usize) {
    let mut out = [T::zero(); 6];
    let dim;
    let [x1, x2, x3, x4] = &args.poses;
    match inst.kind {
        BlockKind::Da0 => {
            let i = inst.point.unwrap();
            let r = residual_da0(
                x1,
                &measures.m6.as_ref().unwrap()[i],
                &measures.m7.as_ref().unwrap()[i],
            );
            out[..3].copy_from_slice(&[r.x, r.y, r.z]);
            dim = 3;
        }
        BlockKind::Da1 => {
            let i = inst.point.unwrap();
            let r = residual_da1(
                x2,
                &measures.m8.as_ref().unwrap()[i],
                &measures.m9.as_ref().unwrap()[i],
            );
            out[..3].copy_from_slice(&[r.x, r.y, r.z]);
            dim = 3;
        }
        BlockKind::SftA => {
            let i = inst.point.unwrap();
            let r = residual_sft_a(
                x1,
                x3,
                args.flow.as_ref().unwrap(),
                &measures.m7.as_ref().unwrap()[i],
                &measures.m8.as_ref().unwrap()[i],
            );
            out[..3].copy_from_slice(&[r.x, r.y, r.z]);
            dim = 3;
        }
        BlockKind::SftB => {
            let i = inst.point.unwrap();
            let r = residual_sft_b(
                x4,
                args.flow.as_ref().unwrap(),
                &measures.m7.as_ref().unwrap()[i],
                &measures.m9.as_ref().unwrap()[i],
            );
            out[..3].copy_from_slice(&[r.x, r.y, r.z]);
            dim = 3;
        }
        BlockKind::Kc => {
            let r = residual_kc(x1, x3, x4, measures.m2.as_ref().unwrap());
            out.copy_from_slice(&r.as_array());
            dim = 6;
        }
        BlockKind::Ks1 | BlockKind::Ks2 | BlockKind::Ks3 | BlockKind::Ks4 => {
            let (x, m) = match inst.kind {
                BlockKind::Ks1 => (x1, measures.m1.as_ref().unwrap()),
                BlockKind::Ks2 => (x2, measures.m2.as_ref().unwrap()),
                BlockKind::Ks3 => (x3, measures.m3.as_ref().unwrap()),
                _ => (x4, measures.m4.as_ref().unwrap()),
            };
            let r = residual_ks_pose(x, m);
            out.copy_from_slice(&r.as_array());
            dim = 6;
        }
        BlockKind::Ks5 => {
            let i = inst.point.unwrap();
            let r = residual_ks_flow(
                args.flow.as_ref().unwrap(),
                &measures.m5.as_ref().unwrap()[i],
            );
            out[..3].copy_from_slice(&[r.x, r.y, r.z]);
            dim = 3;
        }
    }
    (out, dim)
}

/// Stacked weighted residual vector at the given parameters.
pub fn stacked_residuals<S: SolverScalar>(
    params: &ParameterSet<S>,
    measures: &MeasureSet<S>,
    config: &ProblemConfig,
) -> Result<DVector<S>, SolveError> {
    config.validate(measures)?;
    let n = measures.n_points()?;
    let (instances, total_rows) = build_instances(n, config);
    let mut out = DVector::zeros(total_rows);
    for inst in &instances {
        let args = BlockArgs::from_params(params, inst.point);
        let (values, dim) = eval_instance(inst, &args, measures);
        for r in 0..dim {
            out[inst.row + r] = values[r] * S::of(inst.sqrt_rho);
        }
    }
    Ok(out)
}

fn seed_delta<S: Real>(k: usize) -> TangentDelta<Dual<S>> {
    TangentDelta::basis(
        k,
        Dual {
            re: S::zero(),
            du: S::one(),
        },
    )
}

/// Evaluate an instance on duals with one tangent coordinate seeded.
fn eval_seeded<S: SolverScalar>(
    inst: &Instance,
    dual_args: &BlockArgs<Dual<S>>,
    dual_measures: &MeasureSet<Dual<S>>,
    seeded: ParamBlock,
    k: usize,
) -> ([Dual<S>; 6], usize) {
    let mut args = *dual_args;
    match seeded {
        ParamBlock::Pose(p) => {
            args.poses[p] = args.poses[p].retract(&seed_delta(k));
        }
        ParamBlock::Flow(_) => {
            let flow = args.flow.as_mut().expect("per-point block");
            let seed = Dual {
                re: S::zero(),
                du: S::one(),
            };
            match k {
                0 => flow.delta.x = flow.delta.x + seed,
                1 => flow.delta.y = flow.delta.y + seed,
                _ => flow.delta.z = flow.delta.z + seed,
            }
        }
    }
    eval_instance(inst, &args, dual_measures)
}

fn skew<S: SolverScalar>(v: &Vec3<S>) -> Matrix3<S> {
    Matrix3::new(
        S::zero(),
        -v.z,
        v.y,
        v.z,
        S::zero(),
        -v.x,
        -v.y,
        v.x,
        S::zero(),
    )
}

fn rot_matrix<S: SolverScalar>(pose: &Pose<S>) -> Matrix3<S> {
    let m = pose.rotation.rotation_matrix();
    Matrix3::new(
        m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
    )
}

/// Inverse of the SO(3) left Jacobian at rotation vector `phi`.
fn jl_inv<S: SolverScalar>(phi: &Vec3<S>) -> Matrix3<S> {
    let theta_sq = phi.norm_squared();
    let w = skew(phi);
    let w_sq = w * w;
    let half = S::of(0.5);
    let c = if theta_sq < S::of(1e-8) {
        S::of(1.0 / 12.0) + theta_sq * S::of(1.0 / 720.0)
    } else {
        let theta = num_traits::Float::sqrt(theta_sq);
        let (sin, cos) = num_traits::Float::sin_cos(theta);
        S::one() / theta_sq - (S::one() + cos) / (S::of(2.0) * theta * sin)
    };
    Matrix3::identity() - w * half + w_sq * c
}

/// Analytic Jacobian entries of one instance, in `param_blocks()` order.
fn analytic_entries<S: SolverScalar>(
    inst: &Instance,
    params: &ParameterSet<S>,
    measures: &MeasureSet<S>,
) -> Vec<DMatrix<S>> {
    let pose_block = |j_t: Matrix3<S>, j_r: Matrix3<S>| -> DMatrix<S> {
        let mut m = DMatrix::zeros(3, 6);
        m.view_mut((0, 0), (3, 3)).copy_from(&j_t);
        m.view_mut((0, 3), (3, 3)).copy_from(&j_r);
        m
    };
    match inst.kind {
        BlockKind::Da0 | BlockKind::Da1 => {
            let i = inst.point.unwrap();
            let (pose, src) = if inst.kind == BlockKind::Da0 {
                (&params.x1, &measures.m7.as_ref().unwrap()[i])
            } else {
                (&params.x2, &measures.m9.as_ref().unwrap()[i])
            };
            let r = rot_matrix(pose);
            vec![pose_block(-Matrix3::identity(), r * skew(&src.coords))]
        }
        BlockKind::SftA => {
            let i = inst.point.unwrap();
            let m7 = &measures.m7.as_ref().unwrap()[i];
            let u = m7.coords + params.x5[i].delta;
            let r1 = rot_matrix(&params.x1);
            let r3_t = rot_matrix(&params.x3).transpose();
            // w = x3^-1(x1(u))
            let x1_u = params.x1.rotation.rotate(&u) + params.x1.translation;
            let w = params
                .x3
                .inverse()
                .rotation
                .rotate(&(x1_u - params.x3.translation));
            let j_x1 = pose_block(-r3_t, r3_t * r1 * skew(&u));
            let j_x3 = pose_block(r3_t, -skew(&w));
            let mut j_flow = DMatrix::zeros(3, 3);
            j_flow.copy_from(&(-(r3_t * r1)));
            vec![j_x1, j_x3, j_flow]
        }
        BlockKind::SftB => {
            let i = inst.point.unwrap();
            let m7 = &measures.m7.as_ref().unwrap()[i];
            let u = m7.coords + params.x5[i].delta;
            let r4_t = rot_matrix(&params.x4).transpose();
            let v = params
                .x4
                .inverse()
                .rotation
                .rotate(&(u - params.x4.translation));
            let j_x4 = pose_block(r4_t, -skew(&v));
            let mut j_flow = DMatrix::zeros(3, 3);
            j_flow.copy_from(&(-r4_t));
            vec![j_x4, j_flow]
        }
        BlockKind::Kc => {
            let m2 = measures.m2.as_ref().unwrap();
            let predicted = params
                .x3
                .inverse()
                .compose(&params.x1)
                .compose(&params.x4);
            let phi = predicted.local(m2).rot;
            let jl = jl_inv(&phi);
            let r1 = rot_matrix(&params.x1);
            let r3_t = rot_matrix(&params.x3).transpose();
            let r4_t = rot_matrix(&params.x4).transpose();
            let r_pred = rot_matrix(&predicted);
            let t4 = params.x4.translation;
            let t_pred = predicted.translation;

            let six = |jt_t: Matrix3<S>, jt_r: Matrix3<S>, jr_r: Matrix3<S>| -> DMatrix<S> {
                let mut m = DMatrix::zeros(6, 6);
                m.view_mut((0, 0), (3, 3)).copy_from(&jt_t);
                m.view_mut((0, 3), (3, 3)).copy_from(&jt_r);
                m.view_mut((3, 3), (3, 3)).copy_from(&jr_r);
                m
            };
            let j_x1 = six(-r3_t, r3_t * r1 * skew(&t4), -jl * r4_t);
            let j_x3 = six(r3_t, -skew(&t_pred), jl * r_pred.transpose());
            let j_x4 = six(-r3_t * r1, Matrix3::zeros(), -jl);
            vec![j_x1, j_x3, j_x4]
        }
        BlockKind::Ks1 | BlockKind::Ks2 | BlockKind::Ks3 | BlockKind::Ks4 => {
            let (x, m) = match inst.kind {
                BlockKind::Ks1 => (&params.x1, measures.m1.as_ref().unwrap()),
                BlockKind::Ks2 => (&params.x2, measures.m2.as_ref().unwrap()),
                BlockKind::Ks3 => (&params.x3, measures.m3.as_ref().unwrap()),
                _ => (&params.x4, measures.m4.as_ref().unwrap()),
            };
            let phi = x.local(m).rot;
            let mut j = DMatrix::zeros(6, 6);
            j.view_mut((0, 0), (3, 3))
                .copy_from(&(-Matrix3::<S>::identity()));
            j.view_mut((3, 3), (3, 3)).copy_from(&(-jl_inv(&phi)));
            vec![j]
        }
        BlockKind::Ks5 => {
            let mut j = DMatrix::zeros(3, 3);
            j.copy_from(&(-Matrix3::<S>::identity()));
            vec![j]
        }
    }
}

fn row_block_for_instance<S: SolverScalar>(
    inst: &Instance,
    params: &ParameterSet<S>,
    measures: &MeasureSet<S>,
    dual_params: &ParameterSet<Dual<S>>,
    dual_measures: &MeasureSet<Dual<S>>,
    layout: &ParamLayout,
    mode: DerivativeMode,
) -> Result<(RowBlock<S>, [S; 6]), SolveError> {
    let args = BlockArgs::from_params(params, inst.point);
    let dual_args = BlockArgs::from_params(dual_params, inst.point);
    let (values, dim) = eval_instance(inst, &args, measures);
    let sqrt_rho = S::of(inst.sqrt_rho);
    let non_finite = || SolveError::NonFinite {
        block: inst.kind,
        point: inst.point,
    };
    for value in values.iter().take(dim) {
        if !value.is_finite() {
            return Err(non_finite());
        }
    }

    let mut entries = Vec::new();
    let blocks = inst.param_blocks();
    let analytic = if mode == DerivativeMode::Analytic {
        Some(analytic_entries(inst, params, measures))
    } else {
        None
    };
    for (slot, block) in blocks.iter().enumerate() {
        if layout.offset(*block).is_none() {
            continue;
        }
        let pdim = ParamLayout::block_dim(*block);
        let mut jac = DMatrix::zeros(dim, pdim);
        match &analytic {
            Some(all) => {
                jac.copy_from(&all[slot]);
                jac *= sqrt_rho;
            }
            None => {
                for k in 0..pdim {
                    let (dual_values, _) =
                        eval_seeded(inst, &dual_args, dual_measures, *block, k);
                    for r in 0..dim {
                        jac[(r, k)] = dual_values[r].du * sqrt_rho;
                    }
                }
            }
        }
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(non_finite());
        }
        entries.push((*block, jac));
    }

    let mut weighted = [S::zero(); 6];
    for r in 0..dim {
        weighted[r] = values[r] * sqrt_rho;
    }
    Ok((
        RowBlock {
            kind: inst.kind,
            point: inst.point,
            row: inst.row,
            dim,
            entries,
        },
        weighted,
    ))
}

/// Build the stacked residual vector and block-sparse Jacobian.
pub fn linearize<S: SolverScalar>(
    params: &ParameterSet<S>,
    measures: &MeasureSet<S>,
    config: &ProblemConfig,
    mode: DerivativeMode,
) -> Result<Linearization<S>, SolveError> {
    linearize_inner(params, measures, config, mode, false)
}

/// As [`linearize`] with per-point row blocks evaluated in parallel. The
/// reduction order is fixed by the instance list, so results are identical
/// to the sequential path.
pub fn linearize_parallel<S: SolverScalar>(
    params: &ParameterSet<S>,
    measures: &MeasureSet<S>,
    config: &ProblemConfig,
    mode: DerivativeMode,
) -> Result<Linearization<S>, SolveError> {
    linearize_inner(params, measures, config, mode, true)
}

fn linearize_inner<S: SolverScalar>(
    params: &ParameterSet<S>,
    measures: &MeasureSet<S>,
    config: &ProblemConfig,
    mode: DerivativeMode,
    parallel: bool,
) -> Result<Linearization<S>, SolveError> {
    config.validate(measures)?;
    let n = measures.n_points()?;
    if params.n_points() != n {
        return Err(SolveError::Problem(
            crate::residuals::ProblemError::ParameterSizeMismatch {
                params: params.n_points(),
                measures: n,
            },
        ));
    }
    let layout = ParamLayout::from_fixed(
        [
            params.fixed.x1,
            params.fixed.x2,
            params.fixed.x3,
            params.fixed.x4,
        ],
        &params.fixed.x5,
    );
    let (instances, total_rows) = build_instances(n, config);

    let dual_params: ParameterSet<Dual<S>> = params.map(Dual::constant);
    let dual_measures: MeasureSet<Dual<S>> = measures.map(Dual::constant);

    let eval_mode = if mode == DerivativeMode::FiniteDifferenceCheck {
        DerivativeMode::AutoDiff
    } else {
        mode
    };
    let build = |inst: &Instance| {
        row_block_for_instance(
            inst,
            params,
            measures,
            &dual_params,
            &dual_measures,
            &layout,
            eval_mode,
        )
    };
    let built: Result<Vec<_>, SolveError> = if parallel {
        instances.par_iter().map(build).collect()
    } else {
        instances.iter().map(build).collect()
    };
    let built = built?;

    let mut residuals = DVector::zeros(total_rows);
    let mut rows = Vec::with_capacity(built.len());
    let mut cost = S::zero();
    for (block, weighted) in built {
        for r in 0..block.dim {
            let value = weighted[r];
            residuals[block.row + r] = value;
            cost += value * value;
        }
        rows.push(block);
    }
    cost *= S::of(0.5);

    let lin = Linearization {
        residuals,
        rows,
        layout,
        cost,
    };
    if mode == DerivativeMode::FiniteDifferenceCheck {
        verify_against_finite_differences(&lin, params, measures, config)?;
    }
    Ok(lin)
}

/// Gradient of the cost: J^T r over the free columns.
pub fn gradient<S: SolverScalar>(lin: &Linearization<S>) -> DVector<S> {
    let mut g = DVector::zeros(lin.layout.total_cols());
    for block in &lin.rows {
        let r = lin.residuals.rows(block.row, block.dim);
        for (param, jac) in &block.entries {
            let offset = lin.layout.offset(*param).expect("entry for free param");
            let contribution = jac.transpose() * r;
            let mut seg = g.rows_mut(offset, contribution.len());
            seg += contribution;
        }
    }
    g
}

/// Dense Jacobian by central finite differences in tangent space.
pub fn finite_difference_jacobian<S: SolverScalar>(
    params: &ParameterSet<S>,
    measures: &MeasureSet<S>,
    config: &ProblemConfig,
) -> Result<DMatrix<S>, SolveError> {
    let layout = ParamLayout::from_fixed(
        [
            params.fixed.x1,
            params.fixed.x2,
            params.fixed.x3,
            params.fixed.x4,
        ],
        &params.fixed.x5,
    );
    let rows = stacked_residuals(params, measures, config)?.len();
    let mut jac = DMatrix::zeros(rows, layout.total_cols());
    let h = S::of(FD_STEP);
    for col in 0..layout.total_cols() {
        let mut step = DVector::zeros(layout.total_cols());
        step[col] = h;
        let plus = stacked_residuals(&apply_step(params, &layout, &step), measures, config)?;
        step[col] = -h;
        let minus = stacked_residuals(&apply_step(params, &layout, &step), measures, config)?;
        let column = (plus - minus) / (S::of(2.0) * h);
        jac.set_column(col, &column);
    }
    Ok(jac)
}

/// Expand the block-sparse Jacobian to a dense matrix.
pub fn dense_jacobian<S: SolverScalar>(lin: &Linearization<S>) -> DMatrix<S> {
    let mut jac = DMatrix::zeros(lin.residuals.len(), lin.layout.total_cols());
    for block in &lin.rows {
        for (param, entry) in &block.entries {
            let offset = lin.layout.offset(*param).expect("entry for free param");
            jac.view_mut((block.row, offset), (block.dim, entry.ncols()))
                .copy_from(entry);
        }
    }
    jac
}

fn verify_against_finite_differences<S: SolverScalar>(
    lin: &Linearization<S>,
    params: &ParameterSet<S>,
    measures: &MeasureSet<S>,
    config: &ProblemConfig,
) -> Result<(), SolveError> {
    let fd = finite_difference_jacobian(params, measures, config)?;
    let dense = dense_jacobian(lin);
    let abs_tol = S::of(FD_ABS_TOL);
    let rel_tol = S::of(FD_REL_TOL);
    for block in &lin.rows {
        for (param, entry) in &block.entries {
            let offset = lin.layout.offset(*param).expect("free param");
            for r in 0..block.dim {
                for c in 0..entry.ncols() {
                    let got = dense[(block.row + r, offset + c)];
                    let expected = fd[(block.row + r, offset + c)];
                    let diff = num_traits::Float::abs(got - expected);
                    let scale = num_traits::Float::abs(expected);
                    if diff > num_traits::Float::max(abs_tol, rel_tol * scale) {
                        return Err(SolveError::DerivativeMismatch {
                            block: block.kind,
                            point: block.point,
                            row: r,
                            col: c,
                            computed: got.to_f64().unwrap_or(f64::NAN),
                            finite_difference: expected.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
