//! Multi-initialization gauge-ambiguity diagnosis.
//!
//! A problem is called ambiguous when independent starts reach the same
//! cost while landing on measurably different parameters, corroborated by a
//! rank-deficient normal matrix: the signature of a continuous solution
//! family rather than separate local minima.

use mvflow_core::metrics::{add_flow, add_transform};
use mvflow_core::residuals::{MeasureSet, ParameterSet, ProblemConfig};
use mvflow_core::solver::{solve, RankDiagnostics, SolveError, SolveOptions, SolveReport};
use mvflow_core::Vec3;
use serde::{Deserialize, Serialize};

/// Costs must agree within this to count as "the same optimum".
pub const COST_AGREEMENT: f64 = 1e-10;
/// A parameter disagreeing by more than this (meters, ADD) marks a family.
pub const DISAGREEMENT_THRESHOLD: f64 = 1e-3;
/// Rank deficiency: smallest eigenvalue below this ratio of the largest.
pub const RANK_RATIO: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Unique,
    Ambiguous,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Unique => "unique",
            Verdict::Ambiguous => "ambiguous",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub verdict: Verdict,
    /// Max pairwise final-cost difference across inits.
    pub cost_spread: f64,
    /// Max pairwise ADD disagreement per pose parameter (x1..x4), meters.
    pub disagreement_poses: [f64; 4],
    /// Max pairwise flow-field ADD disagreement, meters.
    pub disagreement_flows: f64,
    pub rank: RankDiagnostics,
}

impl AmbiguityReport {
    pub fn max_disagreement(&self) -> f64 {
        self.disagreement_poses
            .iter()
            .copied()
            .fold(self.disagreement_flows, f64::max)
    }
}

fn probe_clouds(measures: &MeasureSet<f64>) -> [Vec<Vec3<f64>>; 4] {
    let coords = |points: &Option<Vec<mvflow_core::Point3<f64>>>| -> Vec<Vec3<f64>> {
        points
            .as_ref()
            .map(|v| v.iter().map(|p| p.coords).collect())
            .unwrap_or_default()
    };
    // Source frames: x1 maps from B0, x2 from B1, x3 from A1, x4 from B1.
    [
        coords(&measures.m7),
        coords(&measures.m9),
        coords(&measures.m8),
        coords(&measures.m9),
    ]
}

/// Solve from every init and compare the optima.
pub fn detect_ambiguity(
    measures: &MeasureSet<f64>,
    config: &ProblemConfig,
    options: &SolveOptions,
    inits: &[ParameterSet<f64>],
) -> Result<AmbiguityReport, SolveError> {
    assert!(inits.len() >= 2, "ambiguity check needs at least two inits");
    let mut with_rank = options.clone();
    with_rank.compute_rank_diagnostics = true;

    let mut reports: Vec<SolveReport<f64>> = Vec::with_capacity(inits.len());
    for (index, init) in inits.iter().enumerate() {
        let opts = if index == 0 { &with_rank } else { options };
        reports.push(solve(measures, config, init, opts)?);
    }

    let probes = probe_clouds(measures);
    let mut cost_spread = 0.0f64;
    let mut disagreement_poses = [0.0f64; 4];
    let mut disagreement_flows = 0.0f64;
    for i in 0..reports.len() {
        for j in (i + 1)..reports.len() {
            cost_spread =
                cost_spread.max((reports[i].final_cost - reports[j].final_cost).abs());
            for k in 0..4 {
                if probes[k].is_empty() {
                    continue;
                }
                let add = add_transform(
                    reports[i].params.pose(k),
                    reports[j].params.pose(k),
                    &probes[k],
                )
                .unwrap_or(0.0);
                disagreement_poses[k] = disagreement_poses[k].max(add);
            }
            let flows =
                add_flow(&reports[i].params.x5, &reports[j].params.x5).unwrap_or(0.0);
            disagreement_flows = disagreement_flows.max(flows);
        }
    }

    let rank = reports[0].rank.expect("rank requested on first solve");
    let max_disagreement = disagreement_poses
        .iter()
        .copied()
        .fold(disagreement_flows, f64::max);
    let verdict = if cost_spread <= COST_AGREEMENT
        && max_disagreement > DISAGREEMENT_THRESHOLD
        && rank.is_deficient(RANK_RATIO)
    {
        Verdict::Ambiguous
    } else {
        Verdict::Unique
    };

    Ok(AmbiguityReport {
        verdict,
        cost_spread,
        disagreement_poses,
        disagreement_flows,
        rank,
    })
}
