//! Command-line front end: each subcommand is a thin shell around the
//! corresponding `pipeline::commands` function. Exits nonzero when the
//! run as a whole cannot proceed or any per-video unit failed.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use stereo_saliency::pipeline::{
    DEFAULT_FRAMES_PER_VIDEO, DEFAULT_PIXELS_PER_FRAME, EvaluateOutcome, FusionChoice,
    RunContext, RunOptions, cmd_compare_fusion, cmd_evaluate, cmd_extract, cmd_importance,
    cmd_predict, cmd_train, render_metric_table, write_demo_dataset,
};

/// Environment override for the manifest's output directory.
const OUT_ENV: &str = "STEREO_SALIENCY_OUT";

#[derive(Parser)]
#[command(
    name = "stereo-saliency",
    version,
    about = "Saliency maps for stereoscopic video: feature extraction, forest fusion, evaluation",
    after_help = "The output directory comes from the manifest; set STEREO_SALIENCY_OUT to redirect it."
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run manifest: dataset layout, train/validation split, output directory
    #[arg(long, global = true, default_value = "manifest.json")]
    manifest: PathBuf,
    /// TOML parameter file; overrides the one named by the manifest
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the manifest's
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: one per core)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Restrict the feature set: comma-separated names or groups
    /// (all, photometric, motion, depth, high_level)
    #[arg(long, global = true)]
    features: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Decode every clip of the manifest and write its feature stacks
    Extract,
    /// Fit the random-forest fusion model on the train split
    Train {
        /// Leading frames sampled per training video
        #[arg(long, default_value_t = DEFAULT_FRAMES_PER_VIDEO)]
        frames_per_video: usize,
        /// Pixels sampled per frame (half uniform, half near fixations)
        #[arg(long, default_value_t = DEFAULT_PIXELS_PER_FRAME)]
        pixels_per_frame: usize,
    },
    /// Fuse stored stacks into per-frame saliency maps (PNG + raw floats)
    Predict {
        /// forest, average, multiplication, maximum, spp, gnlns, lmswa, or sdw
        #[arg(long, default_value = "forest", value_parser = parse_fusion)]
        fusion: FusionChoice,
    },
    /// Rank the features of the stored model by permutation importance
    Importance,
    /// Score stored predictions against gaze, beside reference baselines
    Evaluate,
    /// Score every fusion scheme side by side on the same stacks
    CompareFusion,
    /// Write the built-in synthetic demo dataset
    Synth {
        /// Directory to create the dataset in
        #[arg(long, default_value = "demo")]
        out: PathBuf,
    },
}

fn parse_fusion(s: &str) -> Result<FusionChoice, String> {
    FusionChoice::parse(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(workers) = cli.run.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("worker pool")?;
    }

    if let Command::Synth { out } = &cli.command {
        let manifest = write_demo_dataset(out)?;
        println!("demo dataset written; manifest at {}", manifest.display());
        return Ok(ExitCode::SUCCESS);
    }

    let opts = RunOptions {
        config: cli.run.config.clone(),
        seed: cli.run.seed,
        output_dir: std::env::var_os(OUT_ENV).map(PathBuf::from),
        features: cli.run.features.clone(),
    };
    let ctx = RunContext::load(&cli.run.manifest, &opts)
        .with_context(|| format!("loading {}", cli.run.manifest.display()))?;

    match cli.command {
        Command::Extract => {
            let mut failed = 0usize;
            for (video, result) in cmd_extract(&ctx) {
                match result {
                    Ok(r) => println!(
                        "{video}: {} frames ({} extracted, {} reused) in {:.1}s",
                        r.frames,
                        r.extracted,
                        r.skipped,
                        r.elapsed_ms / 1e3
                    ),
                    Err(e) => {
                        eprintln!("{video}: failed: {e}");
                        failed += 1;
                    }
                }
            }
            Ok(exit_for(failed))
        }
        Command::Train {
            frames_per_video,
            pixels_per_frame,
        } => {
            let outcome = cmd_train(&ctx, frames_per_video, pixels_per_frame)?;
            println!(
                "trained {} trees (min leaf {}) on {} samples from {} video(s); oob mse {:.6}",
                outcome.log.n_trees,
                outcome.log.min_leaf,
                outcome.log.samples,
                outcome.log.videos.len(),
                outcome.log.oob_mse
            );
            println!("model written to {}", outcome.model_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict { fusion } => {
            let mut failed = 0usize;
            for (video, result) in cmd_predict(&ctx, fusion)? {
                match result {
                    Ok(r) => println!(
                        "{video}: {} maps ({}) -> {}",
                        r.frames,
                        fusion.label(),
                        r.out_dir.display()
                    ),
                    Err(e) => {
                        eprintln!("{video}: failed: {e}");
                        failed += 1;
                    }
                }
            }
            Ok(exit_for(failed))
        }
        Command::Importance => {
            let rows = cmd_importance(&ctx)?;
            println!("{:<28}{:>12}", "feature", "importance");
            for (kind, score) in rows {
                println!("{:<28}{score:>12.4}", kind.name());
            }
            println!(
                "table written to {}",
                ctx.output_dir.join("importance.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate => {
            let outcome = cmd_evaluate(&ctx)?;
            print!("{}", render_metric_table(&outcome.report));
            println!(
                "report written to {}",
                ctx.output_dir.join("evaluation.json").display()
            );
            Ok(exit_for_outcome(&outcome))
        }
        Command::CompareFusion => {
            let outcome = cmd_compare_fusion(&ctx)?;
            print!("{}", render_metric_table(&outcome.report));
            println!(
                "report written to {}",
                ctx.output_dir.join("fusion_comparison.json").display()
            );
            Ok(exit_for_outcome(&outcome))
        }
        Command::Synth { .. } => unreachable!("handled before context load"),
    }
}

fn exit_for(failed: usize) -> ExitCode {
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn exit_for_outcome(outcome: &EvaluateOutcome) -> ExitCode {
    // Per-video details were already reported as warnings while scoring.
    if !outcome.failures.is_empty() {
        eprintln!("{} video(s) could not be scored", outcome.failures.len());
    }
    exit_for(outcome.failures.len())
}
