//! Damped normal equations: flow-block elimination and a dense reference
//! path.
//!
//! Each per-point flow couples only to its own residual rows (SFT_A, SFT_B,
//! KS5 of the same point), so the normal matrix has an arrow structure: a
//! dense pose-pose corner plus independent 3x3 flow diagonal blocks. The
//! reduced pose system comes from eliminating those blocks; back
//! substitution recovers the flow steps.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::linearize::{Linearization, ParamBlock};
use super::SolverScalar;

/// Pose-segment system plus the per-flow data needed for back substitution.
pub struct ReducedSystem<S: SolverScalar> {
    /// Damped, flow-eliminated pose-pose matrix.
    pub h_reduced: DMatrix<S>,
    /// Right-hand side of the reduced system (for `H δ = rhs`).
    pub rhs_reduced: DVector<S>,
    pose_cols: usize,
    total_cols: usize,
    flows: Vec<FlowBlock<S>>,
}

struct FlowBlock<S: SolverScalar> {
    col: usize,
    h_pf: DMatrix<S>,
    h_ff_inv: Matrix3<S>,
    b_f: Vector3<S>,
}

struct Accumulated<S: SolverScalar> {
    h_pp: DMatrix<S>,
    g_p: DVector<S>,
    flows: Vec<FlowData<S>>,
    /// Column offset -> flow slot.
    slot_of_col: std::collections::HashMap<usize, usize>,
    pose_cols: usize,
    total_cols: usize,
}

struct FlowData<S: SolverScalar> {
    col: usize,
    h_pf: DMatrix<S>,
    h_ff: Matrix3<S>,
    g_f: Vector3<S>,
}

fn accumulate<S: SolverScalar>(lin: &Linearization<S>) -> Accumulated<S> {
    let pose_cols = lin.layout.pose_cols();
    let total_cols = lin.layout.total_cols();
    let mut h_pp = DMatrix::zeros(pose_cols, pose_cols);
    let mut g_p = DVector::zeros(pose_cols);
    let mut flows: Vec<FlowData<S>> = lin
        .layout
        .free_flows()
        .map(|(_, col)| FlowData {
            col,
            h_pf: DMatrix::zeros(pose_cols, 3),
            h_ff: Matrix3::zeros(),
            g_f: Vector3::zeros(),
        })
        .collect();
    let slot_of_col: std::collections::HashMap<usize, usize> = flows
        .iter()
        .enumerate()
        .map(|(slot, f)| (f.col, slot))
        .collect();

    for block in &lin.rows {
        let r = lin.residuals.rows(block.row, block.dim);
        for (a, jac_a) in &block.entries {
            let col_a = lin.layout.offset(*a).expect("free param");
            let g_contrib = jac_a.transpose() * r;
            match a {
                ParamBlock::Pose(_) => {
                    let mut seg = g_p.rows_mut(col_a, 6);
                    seg += g_contrib;
                }
                ParamBlock::Flow(_) => {
                    let slot = slot_of_col[&col_a];
                    for k in 0..3 {
                        flows[slot].g_f[k] += g_contrib[k];
                    }
                }
            }
            for (b, jac_b) in &block.entries {
                let col_b = lin.layout.offset(*b).expect("free param");
                let h_contrib = jac_a.transpose() * jac_b;
                match (a, b) {
                    (ParamBlock::Pose(_), ParamBlock::Pose(_)) => {
                        let mut view = h_pp.view_mut((col_a, col_b), (6, 6));
                        view += h_contrib;
                    }
                    (ParamBlock::Pose(_), ParamBlock::Flow(_)) => {
                        let slot = slot_of_col[&col_b];
                        let mut view = flows[slot].h_pf.view_mut((col_a, 0), (6, 3));
                        view += h_contrib;
                    }
                    // The transpose is written by the pose-flow pair.
                    (ParamBlock::Flow(_), ParamBlock::Pose(_)) => {}
                    (ParamBlock::Flow(_), ParamBlock::Flow(_)) => {
                        let slot = slot_of_col[&col_a];
                        for i in 0..3 {
                            for j in 0..3 {
                                flows[slot].h_ff[(i, j)] += h_contrib[(i, j)];
                            }
                        }
                    }
                }
            }
        }
    }
    Accumulated {
        h_pp,
        g_p,
        flows,
        slot_of_col,
        pose_cols,
        total_cols,
    }
}

/// Invert a damped 3x3 flow block, with an extra-damping fallback for
/// singular blocks (e.g. a flow no active residual touches at lambda 0).
fn invert_flow_block<S: SolverScalar>(h_ff: &Matrix3<S>, lambda: S) -> Matrix3<S> {
    let damped = h_ff + Matrix3::identity() * lambda;
    if let Some(chol) = damped.cholesky() {
        return chol.inverse();
    }
    let extra = num_traits::Float::max(S::of(1e-12), damped.trace() * S::of(1e-9));
    let stabilized = damped + Matrix3::identity() * extra;
    stabilized
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(Matrix3::zeros)
}

/// Eliminate the flow blocks from the damped normal equations, leaving a
/// pose-only system. With no free flows this is a no-op repackaging.
pub fn eliminate_flow_blocks<S: SolverScalar>(
    lin: &Linearization<S>,
    lambda: S,
) -> ReducedSystem<S> {
    let acc = accumulate(lin);
    let mut h_reduced = acc.h_pp.clone();
    for i in 0..acc.pose_cols {
        h_reduced[(i, i)] += lambda;
    }
    let mut rhs_reduced = -&acc.g_p;
    let mut flows = Vec::with_capacity(acc.flows.len());
    for data in acc.flows {
        let h_ff_inv = invert_flow_block(&data.h_ff, lambda);
        let b_f = -data.g_f;
        // H_red -= H_pf Hff^-1 H_pf^T ; rhs -= H_pf Hff^-1 b_f
        let h_pf_inv = &data.h_pf * h_ff_inv;
        h_reduced -= &h_pf_inv * data.h_pf.transpose();
        rhs_reduced -= &h_pf_inv * b_f;
        flows.push(FlowBlock {
            col: data.col,
            h_pf: data.h_pf,
            h_ff_inv,
            b_f,
        });
    }
    ReducedSystem {
        h_reduced,
        rhs_reduced,
        pose_cols: acc.pose_cols,
        total_cols: acc.total_cols,
        flows,
    }
}

impl<S: SolverScalar> ReducedSystem<S> {
    /// Solve the reduced pose system and back-substitute the flow steps.
    /// Returns the full step over the layout's columns, or `None` when the
    /// reduced factorization fails.
    pub fn solve(&self) -> Option<DVector<S>> {
        let pose_step = if self.pose_cols == 0 {
            DVector::zeros(0)
        } else {
            self.h_reduced.clone().cholesky()?.solve(&self.rhs_reduced)
        };
        let mut step = DVector::zeros(self.total_cols);
        step.rows_mut(0, self.pose_cols).copy_from(&pose_step);
        for flow in &self.flows {
            // δf = Hff^-1 (b_f - H_fp δp)
            let coupled = flow.h_pf.transpose() * &pose_step;
            let delta = flow.h_ff_inv * (flow.b_f - Vector3::new(coupled[0], coupled[1], coupled[2]));
            for k in 0..3 {
                step[flow.col + k] = delta[k];
            }
        }
        Some(step)
    }
}

/// Full damped normal matrix and gradient, densely assembled.
pub fn dense_normal<S: SolverScalar>(lin: &Linearization<S>) -> (DMatrix<S>, DVector<S>) {
    let acc = accumulate(lin);
    let total = acc.total_cols;
    let mut h = DMatrix::zeros(total, total);
    let mut g = DVector::zeros(total);
    h.view_mut((0, 0), (acc.pose_cols, acc.pose_cols))
        .copy_from(&acc.h_pp);
    g.rows_mut(0, acc.pose_cols).copy_from(&acc.g_p);
    let _ = &acc.slot_of_col;
    for data in &acc.flows {
        h.view_mut((0, data.col), (acc.pose_cols, 3))
            .copy_from(&data.h_pf);
        h.view_mut((data.col, 0), (3, acc.pose_cols))
            .copy_from(&data.h_pf.transpose());
        h.view_mut((data.col, data.col), (3, 3)).copy_from(&data.h_ff);
        for k in 0..3 {
            g[data.col + k] = data.g_f[k];
        }
    }
    (h, g)
}

/// Reference path: solve the full damped system directly.
pub fn solve_dense<S: SolverScalar>(lin: &Linearization<S>, lambda: S) -> Option<DVector<S>> {
    let (mut h, g) = dense_normal(lin);
    for i in 0..h.nrows() {
        h[(i, i)] += lambda;
    }
    if h.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    h.cholesky().map(|c| c.solve(&(-g)))
}

/// Eigenvalue extremes of the undamped normal matrix over the free tangent
/// space; the gauge-deficiency signal.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct RankDiagnostics {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub tangent_dim: usize,
}

impl RankDiagnostics {
    /// Deficient when the smallest eigenvalue is below `ratio` times the
    /// largest.
    pub fn is_deficient(&self, ratio: f64) -> bool {
        self.tangent_dim > 0 && self.min_eigenvalue < ratio * self.max_eigenvalue
    }
}

/// Compute rank diagnostics from a linearization (lambda = 0).
pub fn rank_diagnostics<S: SolverScalar>(lin: &Linearization<S>) -> RankDiagnostics {
    let (h, _) = dense_normal(lin);
    let dim = h.nrows();
    if dim == 0 {
        return RankDiagnostics {
            min_eigenvalue: 0.0,
            max_eigenvalue: 0.0,
            tangent_dim: 0,
        };
    }
    let eigen = h.symmetric_eigen();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for value in eigen.eigenvalues.iter() {
        let v = value.to_f64().unwrap_or(f64::NAN);
        min = min.min(v);
        max = max.max(v);
    }
    RankDiagnostics {
        min_eigenvalue: min,
        max_eigenvalue: max,
        tangent_dim: dim,
    }
}
