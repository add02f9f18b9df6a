//! Measure/parameter data model and the four residual block families.
//!
//! The objective is `½ · Σ_blocks ρ_block · Σ_i ‖f_block,i‖²` over the active
//! blocks. Pose-valued residuals are expressed as 6-vectors through
//! [`Pose::local`]: translation difference plus rotation tangent, ordered
//! `[trans, rot]`, zero exactly when measurement and prediction agree. Their
//! sign follows the measure-minus-prediction direction, so a parameter
//! retracted by `d` away from its measure produces residual `-d`.
//!
//! Stacking order of the full residual vector is fixed: DA0 points, DA1
//! points, SFT_A points, SFT_B points, KC, KS1..KS5.

mod model;

pub use model::{
    BlockKind, BlockSet, BlockWeights, FixedParams, MeasureSet, ParameterSet, ProblemConfig,
    ProblemError,
};

use crate::geometry::{FlowVector, Point3, Pose, TangentDelta, Vec3};
use crate::scalar::Real;

/// Cross-camera data association at t0: `m6 - x1 · m7`.
pub fn residual_da0<T: Real>(x1: &Pose<T>, m6: &Point3<T>, m7: &Point3<T>) -> Vec3<T> {
    m6.sub(&x1.apply(m7))
}

/// Cross-camera data association at t1: `m8 - x2 · m9`.
pub fn residual_da1<T: Real>(x2: &Pose<T>, m8: &Point3<T>, m9: &Point3<T>) -> Vec3<T> {
    m8.sub(&x2.apply(m9))
}

/// Scene-flow transport through camera A:
/// `m8 - inv(x3) · x1 · (m7 + x5)`.
pub fn residual_sft_a<T: Real>(
    x1: &Pose<T>,
    x3: &Pose<T>,
    x5: &FlowVector<T>,
    m7: &Point3<T>,
    m8: &Point3<T>,
) -> Vec3<T> {
    let advanced = m7.advance(x5);
    m8.sub(&x3.inverse().apply(&x1.apply(&advanced)))
}

/// Scene-flow transport through camera B: `m9 - inv(x4) · (m7 + x5)`.
pub fn residual_sft_b<T: Real>(
    x4: &Pose<T>,
    x5: &FlowVector<T>,
    m7: &Point3<T>,
    m9: &Point3<T>,
) -> Vec3<T> {
    let advanced = m7.advance(x5);
    m9.sub(&x4.inverse().apply(&advanced))
}

/// Kinematic loop closure: the 6-vector difference between `m2` and the
/// chained transform `inv(x3) · x1 · x4`, zero when the loop
/// A1 → A0 → B0 → B1 closes onto `m2`.
pub fn residual_kc<T: Real>(
    x1: &Pose<T>,
    x3: &Pose<T>,
    x4: &Pose<T>,
    m2: &Pose<T>,
) -> TangentDelta<T> {
    let predicted = x3.inverse().compose(x1).compose(x4);
    predicted.local(m2)
}

/// Kinematic supervision of a pose parameter against its measure. With
/// `x = m.retract(d)` the residual is `-d`.
pub fn residual_ks_pose<T: Real>(x: &Pose<T>, m: &Pose<T>) -> TangentDelta<T> {
    x.local(m)
}

/// Kinematic supervision of a flow parameter: `m5 - x5`.
pub fn residual_ks_flow<T: Real>(x5: &FlowVector<T>, m5: &FlowVector<T>) -> Vec3<T> {
    debug_assert_eq!(x5.frame, m5.frame, "KS5 frames disagree");
    m5.delta - x5.delta
}

/// The weighted objective: `½ Σ ρ ‖f‖²` over every active residual, walking
/// blocks in the fixed stacking order.
pub fn total_cost<T: Real>(
    params: &ParameterSet<T>,
    measures: &MeasureSet<T>,
    config: &ProblemConfig,
) -> Result<T, ProblemError> {
    config.validate(measures)?;
    let n = measures.n_points()?;
    if params.n_points() != n {
        return Err(ProblemError::ParameterSizeMismatch {
            params: params.n_points(),
            measures: n,
        });
    }

    let mut cost = T::zero();
    let mut add = |rho: f64, sq: T| {
        cost = cost + T::of(0.5 * rho) * sq;
    };

    if config.active.da0 {
        let (m6, m7) = (measures.m6.as_ref().unwrap(), measures.m7.as_ref().unwrap());
        for i in 0..n {
            add(
                config.rho.da0,
                residual_da0(&params.x1, &m6[i], &m7[i]).norm_squared(),
            );
        }
    }
    if config.active.da1 {
        let (m8, m9) = (measures.m8.as_ref().unwrap(), measures.m9.as_ref().unwrap());
        for i in 0..n {
            add(
                config.rho.da1,
                residual_da1(&params.x2, &m8[i], &m9[i]).norm_squared(),
            );
        }
    }
    if config.active.sft_a {
        let (m7, m8) = (measures.m7.as_ref().unwrap(), measures.m8.as_ref().unwrap());
        for i in 0..n {
            add(
                config.rho.sft_a,
                residual_sft_a(&params.x1, &params.x3, &params.x5[i], &m7[i], &m8[i])
                    .norm_squared(),
            );
        }
    }
    if config.active.sft_b {
        let (m7, m9) = (measures.m7.as_ref().unwrap(), measures.m9.as_ref().unwrap());
        for i in 0..n {
            add(
                config.rho.sft_b,
                residual_sft_b(&params.x4, &params.x5[i], &m7[i], &m9[i]).norm_squared(),
            );
        }
    }
    if config.active.kc {
        let r = residual_kc(
            &params.x1,
            &params.x3,
            &params.x4,
            measures.m2.as_ref().unwrap(),
        );
        add(
            config.rho.kc,
            r.trans.norm_squared() + r.rot.norm_squared(),
        );
    }
    for (kind, active, rho, x, m) in [
        (
            BlockKind::Ks1,
            config.active.ks1,
            config.rho.ks1,
            &params.x1,
            &measures.m1,
        ),
        (
            BlockKind::Ks2,
            config.active.ks2,
            config.rho.ks2,
            &params.x2,
            &measures.m2,
        ),
        (
            BlockKind::Ks3,
            config.active.ks3,
            config.rho.ks3,
            &params.x3,
            &measures.m3,
        ),
        (
            BlockKind::Ks4,
            config.active.ks4,
            config.rho.ks4,
            &params.x4,
            &measures.m4,
        ),
    ] {
        let _ = kind;
        if active {
            let r = residual_ks_pose(x, m.as_ref().unwrap());
            add(rho, r.trans.norm_squared() + r.rot.norm_squared());
        }
    }
    if config.active.ks5 {
        let m5 = measures.m5.as_ref().unwrap();
        for &i in &config.ks5_points {
            add(
                config.rho.ks5,
                residual_ks_flow(&params.x5[i], &m5[i]).norm_squared(),
            );
        }
    }
    Ok(cost)
}
