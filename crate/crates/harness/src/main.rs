//! Command-line harness: scenario generation, experiment sweeps, and
//! results validation.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mvflow_core::synth::{derive_measures, generate, ScenarioConfig};
use mvflow_harness::{check_results, emit_results, run_experiment, ExperimentSpec};

#[derive(Parser)]
#[command(
    name = "mvflow",
    about = "Two-camera ego-motion and absolute scene-flow estimation: synthetic experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a ground-truth world from a scenario config and write it as JSON.
    Generate(GenerateArgs),
    /// Run an experiment sweep and emit results.csv / results.json / series.csv.
    Run(RunArgs),
    /// Validate a results.json (and sibling series.csv) against its invariants.
    Check(CheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario config JSON; omit to use the built-in canonical scenario.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output world JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec JSON. Exactly one of --spec / --experiment.
    #[arg(long, conflicts_with = "experiment")]
    spec: Option<PathBuf>,
    /// Built-in preset id (0..=3), or "timing".
    #[arg(long)]
    experiment: Option<String>,
    /// Output directory for results.csv / results.json / series.csv.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated seed list overriding the spec's seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads for sweep points (1 = fully sequential).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct CheckArgs {
    /// Path to a results.json produced by `run`.
    #[arg(long)]
    results: PathBuf,
}

fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let mut config: ScenarioConfig = match &args.spec {
        Some(path) => load_json(path)?,
        None => ScenarioConfig::s1(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let world = generate(&config).context("generating world")?;
    // Fail early if the world cannot produce measures.
    let measures = derive_measures(&world).context("deriving measures")?;
    let n = measures.n_points().context("counting overlap points")?;

    let mut bytes = serde_json::to_vec_pretty(&world)?;
    bytes.push(b'\n');
    fs::write(&args.out, bytes).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote {} ({} points, {} in overlap)",
        args.out.display(),
        world.points_t0.len(),
        n
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut spec: ExperimentSpec = match (&args.spec, &args.experiment) {
        (Some(path), None) => load_json(path)?,
        (None, Some(preset)) => match preset.as_str() {
            "timing" => ExperimentSpec::timing_preset(),
            id => {
                let id: u8 = id.parse().context("experiment id must be 0..=3 or 'timing'")?;
                ExperimentSpec::preset(id)?
            }
        },
        _ => bail!("pass exactly one of --spec <path> or --experiment <id>"),
    };
    if let Some(seeds) = args.seeds {
        if seeds.is_empty() {
            bail!("--seeds list is empty");
        }
        spec.seeds = seeds;
    }

    let rows = run_experiment(&spec, args.threads.max(1))?;
    let failures = rows
        .iter()
        .filter(|r| r.termination == "numerical_failure")
        .count();
    let paths = emit_results(&rows, &spec, &args.out)?;
    eprintln!(
        "wrote {}, {}, {} ({} rows)",
        paths.csv.display(),
        paths.json.display(),
        paths.series.display(),
        rows.len()
    );
    if failures > 0 {
        bail!("{failures} runs ended in numerical failure");
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<()> {
    let outcomes = check_results(&args.results)?;
    let all_passed = mvflow_harness::emit::print_outcomes(&outcomes, std::io::stdout());
    if !all_passed {
        bail!("results file failed invariant checks");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => cmd_generate(args),
        Command::Run(args) => cmd_run(args),
        Command::Check(args) => cmd_check(args),
    }
}
