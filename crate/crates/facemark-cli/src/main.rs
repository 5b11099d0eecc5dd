//! Command-line front end for the occlusion-aware landmark pipeline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "facemark",
    version,
    about = "Occlusion-aware facial landmark pipeline: heatmap codec, detection refinement, head pose, augmentation and metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Key=value config file mirroring the flags; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed for anything stochastic; fixed seeds replay exactly.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-image processing (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a .pts annotation into a binary heatmap stack.
    Encode(commands::encode::EncodeArgs),
    /// Decode a heatmap stack back into landmarks (JSON).
    Decode(commands::decode::DecodeArgs),
    /// Generate synthetic (optionally noisy) heatmap stacks from ground truth.
    Synth(commands::synth::SynthArgs),
    /// Refine detections: per-detection scores, NMS grouping, fusion, occlusion.
    Refine(commands::refine::RefineArgs),
    /// Estimate head pose for landmark records.
    Pose(commands::pose::PoseArgs),
    /// Generate augmented training samples from annotated images.
    Augment(commands::augment::AugmentArgs),
    /// Detection precision-recall at PASCAL overlap.
    EvalDet(commands::evals::EvalDetArgs),
    /// Occlusion precision-recall over a threshold sweep.
    EvalOcc(commands::evals::EvalOccArgs),
    /// Yaw statistics: detection rate, success rate, mean/std absolute error.
    EvalYaw(commands::evals::EvalYawArgs),
    /// Eye and mouth openness features over a landmark sequence.
    Features(commands::features::FeaturesArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(args) => commands::encode::run(args),
        Command::Decode(args) => commands::decode::run(args),
        Command::Synth(args) => commands::synth::run(args),
        Command::Refine(args) => commands::refine::run(args),
        Command::Pose(args) => commands::pose::run(args),
        Command::Augment(args) => commands::augment::run(args),
        Command::EvalDet(args) => commands::evals::run_det(args),
        Command::EvalOcc(args) => commands::evals::run_occ(args),
        Command::EvalYaw(args) => commands::evals::run_yaw(args),
        Command::Features(args) => commands::features::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
