//! `navcore` command-line tool.

mod commands;
mod error;
mod io;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use navcore::sim::BackgroundMode;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "navcore", version, about = "Generate, score, filter and correlate driving scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic scenes and a split manifest.
    Generate(GenerateArgs),
    /// Score a planner or a trajectory file on a scene set.
    Evaluate(EvaluateArgs),
    /// Drop trivial and noisy scenes.
    Filter(FilterArgs),
    /// Correlate open-loop metrics with closed-loop scores over a planner population.
    Correlate(CorrelateArgs),
    /// Draw a scene, optionally with a rollout log, as SVG.
    Render(RenderArgs),
    /// Simulate one planner on one scene and write the log.
    Rollout(RolloutArgs),
    /// Measure batch evaluation throughput and determinism.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub count: usize,
    /// Overridden by NAVCORE_SEED when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Archetype mixture, e.g. `left_turn=0.5,right_turn=0.5`. Defaults to uniform.
    #[arg(long)]
    pub archetypes: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct JobsArg {
    /// Parallel evaluation width. Defaults to the logical core count.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Scene directory, split manifest or scene file.
    #[arg(long)]
    pub scenes: PathBuf,
    /// Registry key, population entry name, or a JSON file mapping scene ids to trajectories.
    #[arg(long)]
    pub planner: String,
    #[arg(long)]
    pub metric_config: Option<PathBuf>,
    /// Also run the planner closed-loop and report CLS.
    #[arg(long)]
    pub closed_loop: bool,
    /// JSON report path; a CSV with the same stem is written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub cv_threshold: f64,
    #[arg(long, default_value_t = 0.8)]
    pub human_threshold: f64,
    #[arg(long)]
    pub metric_config: Option<PathBuf>,
    /// Output directory for the report and the kept-scene manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    /// Population JSON. Defaults to the built-in 42-planner population.
    #[arg(long)]
    pub population: Option<PathBuf>,
    #[arg(long, default_value_t = 15.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 10.0)]
    pub frequency: f64,
    #[arg(long, default_value_t = 4.0)]
    pub horizon: f64,
    #[arg(long, default_value = "replay", value_parser = parse_background)]
    pub background: BackgroundMode,
    /// Output directory for the table, coefficients and scatter plot.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Simulation log from `rollout`. Without it only the map is drawn.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Comma-separated log ticks to draw boxes at. Defaults to first, middle and last.
    #[arg(long, value_delimiter = ',')]
    pub ticks: Option<Vec<usize>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    /// Plan once and track the plan with agents replayed.
    Open,
    /// Replan during the simulation.
    Closed,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub planner: String,
    #[arg(long, value_enum, default_value_t = RolloutMode::Closed)]
    pub mode: RolloutMode,
    #[arg(long, default_value_t = 15.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 10.0)]
    pub frequency: f64,
    #[arg(long, default_value_t = 4.0)]
    pub horizon: f64,
    #[arg(long, default_value = "replay", value_parser = parse_background)]
    pub background: BackgroundMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scene set to benchmark. Without it a corpus of `--count` scenes is generated.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    /// Overridden by NAVCORE_SEED when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "constant_velocity")]
    pub planner: String,
    #[arg(long)]
    pub metric_config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: JobsArg,
}

fn parse_background(s: &str) -> Result<BackgroundMode, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Filter(a) => commands::filter(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::Render(a) => commands::render(a),
        Command::Rollout(a) => commands::rollout(a),
        Command::Bench(a) => commands::bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("navcore: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
