//! Result records, CSV/JSON emission, and the results-file invariant suite.
//!
//! `results.csv` carries one row per run with a fixed column order (see
//! [`CSV_COLUMNS`]); `results.json` carries the full nested records
//! including the spec; `series.csv` aggregates mean and standard deviation
//! over seeds per sweep point. Reruns of the same spec produce byte-equal
//! files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::AmbiguityReport;
use crate::experiment::ExperimentSpec;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("refusing to emit zero result rows")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmitError + '_ {
    move |source| EmitError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One run of one sweep point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: u8,
    pub scenario: String,
    pub known_pose_mode: String,
    pub seed: u64,
    /// Index of the (scenario, mode, noise, count) combination.
    pub sweep_index: usize,
    pub noise_index: usize,
    pub sigma_point: f64,
    pub sigma_flow: f64,
    pub sigma_trans: f64,
    pub sigma_rot: f64,
    pub known_flow_count: usize,
    pub n_points: usize,
    pub add_in_da: f64,
    pub add_in_tf: f64,
    pub add_in_sf: f64,
    pub add_out_x1: f64,
    pub add_out_x2: f64,
    pub add_out_x3: f64,
    pub add_out_x4: f64,
    pub add_out_sf: f64,
    pub cost_initial: f64,
    pub cost_final: f64,
    pub iterations: usize,
    pub termination: String,
    pub build_ms: f64,
    pub solve_ms: f64,
    pub min_eigenvalue: Option<f64>,
    pub max_eigenvalue: Option<f64>,
    pub ambiguity: Option<AmbiguityReport>,
}

/// Fixed column order of `results.csv`.
pub const CSV_COLUMNS: [&str; 32] = [
    "experiment",
    "scenario",
    "known_pose_mode",
    "seed",
    "sweep_index",
    "noise_index",
    "sigma_point_m",
    "sigma_flow_m",
    "sigma_trans_m",
    "sigma_rot_rad",
    "known_flow_count",
    "n_points",
    "add_in_da_m",
    "add_in_tf_m",
    "add_in_sf_m",
    "add_out_x1_m",
    "add_out_x2_m",
    "add_out_x3_m",
    "add_out_x4_m",
    "add_out_sf_m",
    "cost_initial",
    "cost_final",
    "iterations",
    "termination",
    "build_ms",
    "solve_ms",
    "min_eigenvalue",
    "max_eigenvalue",
    "ambiguity_verdict",
    "ambiguity_cost_spread",
    "ambiguity_max_disagreement_m",
    "ambiguity_min_eigenvalue",
];

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl ResultRow {
    fn csv_record(&self) -> Vec<String> {
        vec![
            self.experiment.to_string(),
            self.scenario.clone(),
            self.known_pose_mode.clone(),
            self.seed.to_string(),
            self.sweep_index.to_string(),
            self.noise_index.to_string(),
            fmt_f64(self.sigma_point),
            fmt_f64(self.sigma_flow),
            fmt_f64(self.sigma_trans),
            fmt_f64(self.sigma_rot),
            self.known_flow_count.to_string(),
            self.n_points.to_string(),
            fmt_f64(self.add_in_da),
            fmt_f64(self.add_in_tf),
            fmt_f64(self.add_in_sf),
            fmt_f64(self.add_out_x1),
            fmt_f64(self.add_out_x2),
            fmt_f64(self.add_out_x3),
            fmt_f64(self.add_out_x4),
            fmt_f64(self.add_out_sf),
            fmt_f64(self.cost_initial),
            fmt_f64(self.cost_final),
            self.iterations.to_string(),
            self.termination.clone(),
            fmt_f64(self.build_ms),
            fmt_f64(self.solve_ms),
            fmt_opt(self.min_eigenvalue),
            fmt_opt(self.max_eigenvalue),
            self.ambiguity
                .as_ref()
                .map(|a| a.verdict.to_string())
                .unwrap_or_default(),
            fmt_opt(self.ambiguity.as_ref().map(|a| a.cost_spread)),
            fmt_opt(self.ambiguity.as_ref().map(|a| a.max_disagreement())),
            fmt_opt(self.ambiguity.as_ref().map(|a| a.rank.min_eigenvalue)),
        ]
    }
}

/// Per-sweep-point aggregate over seeds.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub experiment: u8,
    pub scenario: String,
    pub known_pose_mode: String,
    pub sweep_index: usize,
    pub sigma_point: f64,
    pub sigma_flow: f64,
    pub sigma_trans: f64,
    pub sigma_rot: f64,
    pub known_flow_count: usize,
    pub n_points: usize,
    pub n_seeds: usize,
    pub add_in_da_mean: f64,
    pub add_in_tf_mean: f64,
    pub add_in_sf_mean: f64,
    pub add_out_x1_mean: f64,
    pub add_out_x1_std: f64,
    pub add_out_x2_mean: f64,
    pub add_out_x2_std: f64,
    pub add_out_x3_mean: f64,
    pub add_out_x3_std: f64,
    pub add_out_x4_mean: f64,
    pub add_out_x4_std: f64,
    pub add_out_sf_mean: f64,
    pub add_out_sf_std: f64,
    pub solve_ms_mean: f64,
    pub solve_ms_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let clean: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if clean.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = clean.iter().sum::<f64>() / clean.len() as f64;
    if clean.len() < 2 {
        return (mean, 0.0);
    }
    let var = clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (clean.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregate rows into per-sweep-point series, ordered by sweep index.
pub fn aggregate(rows: &[ResultRow]) -> Vec<SeriesPoint> {
    let mut indices: Vec<usize> = rows.iter().map(|r| r.sweep_index).collect();
    indices.sort_unstable();
    indices.dedup();

    indices
        .into_iter()
        .map(|sweep_index| {
            let group: Vec<&ResultRow> =
                rows.iter().filter(|r| r.sweep_index == sweep_index).collect();
            let first = group[0];
            let take = |f: &dyn Fn(&ResultRow) -> f64| -> Vec<f64> {
                group.iter().map(|r| f(r)).collect()
            };
            let (x1_mean, x1_std) = mean_std(&take(&|r| r.add_out_x1));
            let (x2_mean, x2_std) = mean_std(&take(&|r| r.add_out_x2));
            let (x3_mean, x3_std) = mean_std(&take(&|r| r.add_out_x3));
            let (x4_mean, x4_std) = mean_std(&take(&|r| r.add_out_x4));
            let (sf_mean, sf_std) = mean_std(&take(&|r| r.add_out_sf));
            let (ms_mean, ms_std) = mean_std(&take(&|r| r.solve_ms));
            SeriesPoint {
                experiment: first.experiment,
                scenario: first.scenario.clone(),
                known_pose_mode: first.known_pose_mode.clone(),
                sweep_index,
                sigma_point: first.sigma_point,
                sigma_flow: first.sigma_flow,
                sigma_trans: first.sigma_trans,
                sigma_rot: first.sigma_rot,
                known_flow_count: first.known_flow_count,
                n_points: first.n_points,
                n_seeds: group.len(),
                add_in_da_mean: mean_std(&take(&|r| r.add_in_da)).0,
                add_in_tf_mean: mean_std(&take(&|r| r.add_in_tf)).0,
                add_in_sf_mean: mean_std(&take(&|r| r.add_in_sf)).0,
                add_out_x1_mean: x1_mean,
                add_out_x1_std: x1_std,
                add_out_x2_mean: x2_mean,
                add_out_x2_std: x2_std,
                add_out_x3_mean: x3_mean,
                add_out_x3_std: x3_std,
                add_out_x4_mean: x4_mean,
                add_out_x4_std: x4_std,
                add_out_sf_mean: sf_mean,
                add_out_sf_std: sf_std,
                solve_ms_mean: ms_mean,
                solve_ms_std: ms_std,
            }
        })
        .collect()
}

const SERIES_COLUMNS: [&str; 27] = [
    "experiment",
    "scenario",
    "known_pose_mode",
    "sweep_index",
    "sigma_point_m",
    "sigma_flow_m",
    "sigma_trans_m",
    "sigma_rot_rad",
    "known_flow_count",
    "n_points",
    "n_seeds",
    "add_in_da_mean",
    "add_in_tf_mean",
    "add_in_sf_mean",
    "add_out_x1_mean",
    "add_out_x1_std",
    "add_out_x2_mean",
    "add_out_x2_std",
    "add_out_x3_mean",
    "add_out_x3_std",
    "add_out_x4_mean",
    "add_out_x4_std",
    "add_out_sf_mean",
    "add_out_sf_std",
    "solve_ms_mean",
    "solve_ms_std",
    "",
];

fn series_record(p: &SeriesPoint) -> Vec<String> {
    vec![
        p.experiment.to_string(),
        p.scenario.clone(),
        p.known_pose_mode.clone(),
        p.sweep_index.to_string(),
        fmt_f64(p.sigma_point),
        fmt_f64(p.sigma_flow),
        fmt_f64(p.sigma_trans),
        fmt_f64(p.sigma_rot),
        p.known_flow_count.to_string(),
        p.n_points.to_string(),
        p.n_seeds.to_string(),
        fmt_f64(p.add_in_da_mean),
        fmt_f64(p.add_in_tf_mean),
        fmt_f64(p.add_in_sf_mean),
        fmt_f64(p.add_out_x1_mean),
        fmt_f64(p.add_out_x1_std),
        fmt_f64(p.add_out_x2_mean),
        fmt_f64(p.add_out_x2_std),
        fmt_f64(p.add_out_x3_mean),
        fmt_f64(p.add_out_x3_std),
        fmt_f64(p.add_out_x4_mean),
        fmt_f64(p.add_out_x4_std),
        fmt_f64(p.add_out_sf_mean),
        fmt_f64(p.add_out_sf_std),
        fmt_f64(p.solve_ms_mean),
        fmt_f64(p.solve_ms_std),
        String::new(),
    ]
}

/// Full result document stored as JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultsDocument {
    #[serde(default = "default_version")]
    pub version: u32,
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
}

fn default_version() -> u32 {
    1
}

/// Paths written by [`emit_results`].
#[derive(Clone, Debug)]
pub struct EmittedPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub series: PathBuf,
}

/// Write `results.csv`, `results.json`, and `series.csv` under `out_dir`.
pub fn emit_results(
    rows: &[ResultRow],
    spec: &ExperimentSpec,
    out_dir: &Path,
) -> Result<EmittedPaths, EmitError> {
    if rows.is_empty() {
        return Err(EmitError::Empty);
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let csv_path = out_dir.join("results.csv");
    {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(CSV_COLUMNS)
            .expect("in-memory write");
        for row in rows {
            writer.write_record(row.csv_record()).expect("in-memory write");
        }
        let bytes = writer.into_inner().expect("in-memory flush");
        fs::write(&csv_path, bytes).map_err(io_err(&csv_path))?;
    }

    let json_path = out_dir.join("results.json");
    {
        let doc = ResultsDocument {
            version: 1,
            spec: spec.clone(),
            rows: rows.to_vec(),
        };
        let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|source| EmitError::Json {
            path: json_path.clone(),
            source,
        })?;
        bytes.push(b'\n');
        fs::write(&json_path, bytes).map_err(io_err(&json_path))?;
    }

    let series_path = out_dir.join("series.csv");
    {
        let series = aggregate(rows);
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(&SERIES_COLUMNS[..26])
            .expect("in-memory write");
        for point in &series {
            writer
                .write_record(&series_record(point)[..26])
                .expect("in-memory write");
        }
        let bytes = writer.into_inner().expect("in-memory flush");
        fs::write(&series_path, bytes).map_err(io_err(&series_path))?;
    }

    Ok(EmittedPaths {
        csv: csv_path,
        json: json_path,
        series: series_path,
    })
}

/// One named invariant check over a results file.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Invariant suite over a `results.json` (plus its sibling `series.csv`
/// when present): row counts match the spec's sweep grid, values are sane,
/// and the aggregates reproduce from the raw rows.
pub fn check_results(results_path: &Path) -> Result<Vec<CheckOutcome>, EmitError> {
    let bytes = fs::read(results_path).map_err(io_err(results_path))?;
    let doc: ResultsDocument =
        serde_json::from_slice(&bytes).map_err(|source| EmitError::Json {
            path: results_path.to_path_buf(),
            source,
        })?;
    let mut outcomes = Vec::new();

    outcomes.push(check(
        "rows_nonempty",
        !doc.rows.is_empty(),
        format!("{} rows", doc.rows.len()),
    ));

    let expected = doc.spec.scenarios.len()
        * doc.spec.known_pose_modes.len()
        * doc.spec.noise_sweep.len()
        * doc.spec.known_flow_counts.len()
        * doc.spec.seeds.len();
    outcomes.push(check(
        "row_count_matches_sweep_grid",
        doc.rows.len() == expected,
        format!("{} rows vs {} grid points", doc.rows.len(), expected),
    ));

    let mut sane = true;
    let mut detail = String::from("all rows finite and nonnegative");
    for (i, row) in doc.rows.iter().enumerate() {
        let adds = [
            row.add_in_da,
            row.add_in_tf,
            row.add_in_sf,
            row.add_out_x1,
            row.add_out_x2,
            row.add_out_x3,
            row.add_out_x4,
            row.add_out_sf,
        ];
        let adds_ok = adds.iter().all(|v| v.is_nan() || *v >= 0.0);
        let costs_ok = row.cost_final.is_finite()
            && row.cost_initial.is_finite()
            && row.cost_final <= row.cost_initial * (1.0 + 1e-12) + 1e-30;
        let times_ok = row.build_ms >= 0.0 && row.solve_ms >= 0.0;
        let termination_ok = matches!(
            row.termination.as_str(),
            "cost_tolerance" | "gradient_tolerance" | "max_iterations" | "numerical_failure"
        );
        if !(adds_ok && costs_ok && times_ok && termination_ok) {
            sane = false;
            detail = format!("row {i} violates basic invariants");
            break;
        }
    }
    outcomes.push(check("row_values_sane", sane, detail));

    let series_path = results_path
        .parent()
        .map(|dir| dir.join("series.csv"))
        .filter(|p| p.exists());
    if let Some(series_path) = series_path {
        let recomputed = aggregate(&doc.rows);
        let mut reader = csv::Reader::from_path(&series_path).map_err(|e| EmitError::Io {
            path: series_path.clone(),
            source: std::io::Error::other(e),
        })?;
        let mut matches = true;
        let mut count = 0;
        for (record, expected) in reader.records().zip(&recomputed) {
            let record = record.map_err(|e| EmitError::Io {
                path: series_path.clone(),
                source: std::io::Error::other(e),
            })?;
            count += 1;
            let close = |field: usize, value: f64| -> bool {
                let text = record.get(field).unwrap_or("");
                if text.is_empty() {
                    return value.is_nan();
                }
                let parsed: f64 = text.parse().unwrap_or(f64::NAN);
                (parsed - value).abs() <= 1e-12 * value.abs().max(1.0)
            };
            if !(close(14, expected.add_out_x1_mean)
                && close(22, expected.add_out_sf_mean)
                && close(11, expected.add_in_da_mean))
            {
                matches = false;
                break;
            }
        }
        outcomes.push(check(
            "series_matches_recomputed_aggregates",
            matches && count == recomputed.len(),
            format!("{count} series rows"),
        ));
    }

    Ok(outcomes)
}

/// Print outcomes one per line; returns whether everything passed.
pub fn print_outcomes(outcomes: &[CheckOutcome], mut sink: impl Write) -> bool {
    let mut all = true;
    for outcome in outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(sink, "{status} {} ({})", outcome.name, outcome.detail);
        all &= outcome.passed;
    }
    all
}
