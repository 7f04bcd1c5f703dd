//! `fundus` — optic disc/cup segmentation and glaucoma screening pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fundus_cli::config::RunConfig;
use fundus_cli::stages::{self, Artifacts, MaskSource, SplitFilter};
use fundus_cli::{phantom_data, PipelineError};

#[derive(Parser)]
#[command(
    name = "fundus",
    version,
    about = "Glaucoma screening from fundus images: U-Net disc/cup segmentation, rim-geometry features, RBF-SVM classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    fn to_filter(self) -> SplitFilter {
        match self {
            SplitArg::Train => SplitFilter::Train,
            SplitArg::Test => SplitFilter::Test,
            SplitArg::All => SplitFilter::All,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SourceArg {
    GroundTruth,
    Predicted,
}

impl SourceArg {
    fn to_source(self) -> MaskSource {
        match self {
            SourceArg::GroundTruth => MaskSource::GroundTruth,
            SourceArg::Predicted => MaskSource::Predicted,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Decode, enhance and merge the dataset into prepared training material.
    Prepare {
        #[command(flatten)]
        common: Common,
        /// Dataset manifest CSV (id,image,disc_mask,cup_mask,split,label).
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Train the U-Net segmenter on the prepared data.
    TrainSeg {
        #[command(flatten)]
        common: Common,
    },
    /// Predict label masks and score them against the prepared ground truth.
    Segment {
        #[command(flatten)]
        common: Common,
        /// Weight file; defaults to <out>/weights.bin.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Extract the eight-feature rows into a CSV.
    Features {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        source: SourceArg,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitArg,
    },
    /// Grid-search and train the RBF-SVM on a feature CSV.
    TrainClf {
        #[command(flatten)]
        common: Common,
        /// Feature CSV with labeled rows.
        #[arg(long)]
        features: PathBuf,
    },
    /// Score a trained SVM on a labeled feature CSV.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to <out>/svm_model.json.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: PathBuf,
    },
    /// Generate a synthetic phantom dataset with a manifest.
    Phantom {
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run() -> Result<(), PipelineError> {
    match Cli::parse().command {
        Command::Prepare { common, manifest } => {
            let cfg = RunConfig::load(common.config.as_deref(), common.seed)?;
            let s = stages::cmd_prepare(&cfg, &manifest, &common.out)?;
            println!(
                "prepared {} training samples ({} originals) and {} test images",
                s.train_total, s.train_originals, s.test_total
            );
            if s.cup_clip_warnings > 0 {
                eprintln!(
                    "warning: {} cup pixels outside the disc were clipped",
                    s.cup_clip_warnings
                );
            }
        }
        Command::TrainSeg { common } => {
            let cfg = RunConfig::load(common.config.as_deref(), common.seed)?;
            let s = stages::cmd_train_seg(&cfg, &common.out)?;
            println!(
                "trained {} epochs, final train loss {:.6}, weights at {}",
                s.epochs,
                s.final_train_loss,
                s.weights.display()
            );
            if let Some(v) = s.best_val_loss {
                println!("best validation loss {v:.6}");
            }
        }
        Command::Segment {
            common,
            weights,
            split,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), common.seed)?;
            let weights = weights.unwrap_or_else(|| Artifacts::new(&common.out).weights());
            let s = stages::cmd_segment(&cfg, &common.out, &weights, split.to_filter())?;
            println!(
                "segmented {} images: disc F1 {:.5}, cup F1 {:.5} ({})",
                s.images,
                s.mean_disc.f1,
                s.mean_cup.f1,
                s.report.display()
            );
        }
        Command::Features {
            common,
            source,
            split,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), common.seed)?;
            let s = stages::cmd_features(&cfg, &common.out, source.to_source(), split.to_filter())?;
            println!("wrote {} feature rows to {}", s.rows, s.csv.display());
            if !s.skipped.is_empty() {
                eprintln!("skipped {} empty-disc case(s)", s.skipped.len());
            }
        }
        Command::TrainClf { common, features } => {
            let cfg = RunConfig::load(common.config.as_deref(), common.seed)?;
            let s = stages::cmd_train_clf(&cfg, &common.out, &features)?;
            println!(
                "selected C = {}, gamma = {}; model at {}",
                s.best_c,
                s.best_gamma,
                s.model.display()
            );
        }
        Command::Evaluate {
            common,
            model,
            features,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), common.seed)?;
            let model = model.unwrap_or_else(|| Artifacts::new(&common.out).svm_model());
            let s = stages::cmd_evaluate(&cfg, &common.out, &model, &features)?;
            println!(
                "tp {} fp {} fn {} tn {} | sensitivity {:.2}% specificity {:.2}% accuracy {:.2}%",
                s.counts.true_pos,
                s.counts.false_pos,
                s.counts.false_neg,
                s.counts.true_neg,
                s.scores.sensitivity * 100.0,
                s.scores.specificity * 100.0,
                s.scores.accuracy * 100.0
            );
            println!("report at {}", s.report_json.display());
        }
        Command::Phantom {
            out,
            count,
            resolution,
            seed,
        } => {
            let s = phantom_data::generate(&out, count, resolution, seed)?;
            println!(
                "generated {} glaucoma + {} normal phantom eyes; manifest at {}",
                s.glaucoma,
                s.normal,
                s.manifest.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
