//! Batch command line: plan, mask, tokenmask, stitch, metrics, synth, report.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egostitch::{Error, ErrorClass};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "egostitch", version, about = "Chunked reconstruction stitching and dynamic-suppression metrics")]
struct Cli {
    /// Worker threads (default: machine parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print or write the chunk plan for a sequence length.
    Plan(PlanArgs),
    /// Build the per-frame suppression prior from instance tracks.
    Mask(MaskArgs),
    /// Pool a prior series onto a patch-token grid.
    Tokenmask(TokenArgs),
    /// Estimate chunk similarities, the global trajectory and a fused cloud.
    Stitch(StitchArgs),
    /// Evaluate geometry, contamination and coverage metrics.
    Metrics(MetricsArgs),
    /// Generate a synthetic sequence with exact ground truth.
    Synth(SynthArgs),
    /// Tabulate metric reports of several variants.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum MaskMode {
    DynamicOnly,
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum EvalSet {
    Dynamics,
    Fulltime,
    Both,
}

/// Every subcommand takes `--config FILE`: a JSON object whose keys are the
/// long flag names in snake_case. Flags given on the command line win.
#[derive(Debug, Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PlanArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    chunk: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    /// Write `plan.json` here instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MaskArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<MaskMode>,
    /// Near-hand filter as `radius,threshold`.
    #[arg(long)]
    near_hand: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TokenArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Directory holding a prior series written by `mask`.
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Tokenizer input size as `height,width`.
    #[arg(long)]
    input_size: Option<String>,
    #[arg(long)]
    patch: Option<usize>,
    /// Also write the additive attention bias per frame.
    #[arg(long)]
    bias: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StitchArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Voxel size for the fused cloud (0 keeps every point).
    #[arg(long)]
    voxel: Option<f64>,
    /// Prior series whose pixels are left out of the fused cloud.
    #[arg(long)]
    suppress: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MetricsArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    eval: Option<EvalSet>,
    /// Prior series whose pixels are left out of the chunk clouds.
    #[arg(long)]
    suppress: Option<PathBuf>,
    /// Name of the variant in the report.
    #[arg(long)]
    variant: Option<String>,
    /// Voxel size for the chunk clouds (0 keeps every point).
    #[arg(long)]
    voxel: Option<f64>,
    /// Cap on points per frame for overlap geometry (0 = no cap).
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Synthetic scene configuration (JSON); missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    chunk: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ReportArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Metric report JSON files, one per variant.
    #[arg(long, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn error_json(err: &Error) -> String {
    let class = match err.class() {
        ErrorClass::Config => "config",
        ErrorClass::Data => "data",
        ErrorClass::Geometry => "geometry",
    };
    serde_json::json!({
        "error": {
            "kind": err.kind(),
            "class": class,
            "message": err.to_string(),
        }
    })
    .to_string()
}

fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Geometry => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = Error::Config(e.render().to_string().trim().to_string());
            eprintln!("{}", error_json(&err));
            return ExitCode::from(exit_code(&err));
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
