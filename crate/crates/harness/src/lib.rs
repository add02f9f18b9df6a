//! Experiment harness: configures and runs the four measure-availability
//! settings over noise and point-count sweeps, and emits machine-readable
//! results.
//!
//! Experiment settings by available measures:
//!
//! | id | measures          | behavior                                        |
//! |----|-------------------|-------------------------------------------------|
//! | 0  | m1, m2, m6–m9     | x1/x2 recoverable; x3/x4/x5 gauge-ambiguous     |
//! | 1  | m3, m6–m9         | one camera's ego-motion known; unique solution  |
//! | 2  | m5 (k pts), m6–m9 | known flows substitute for ego-motion measures  |
//! | 3  | m1–m9             | overconstrained; combined priors                |

pub mod ambiguity;
pub mod emit;
pub mod experiment;

pub use ambiguity::{detect_ambiguity, AmbiguityReport, Verdict};
pub use emit::{check_results, emit_results, CheckOutcome, ResultRow};
pub use experiment::{
    run_experiment, ExperimentSpec, KnownPoseMode, NamedScenario, NoisePoint, RunError,
};
