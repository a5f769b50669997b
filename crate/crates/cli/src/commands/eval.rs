//! `eval`: score a checkpoint on one side of the participant split and
//! write the per-activity report CSV.

use super::{Context, ModelKind};
use crate::config::default_test_pairs;
use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use handover_core::checkpoint::Checkpoint;
use handover_core::dataio::participant_split;
use handover_core::rot::eval_rot;
use handover_core::svae::eval_svae;
use handover_core::timing::accuracy_report;
use std::path::PathBuf;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitSide {
    Train,
    Test,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub model: ModelKind,

    /// Checkpoint file (default: <out>/<model>.ckpt.json).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Corpus directory (default: <out>/corpus).
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    /// Participant pairs forming the test side (default: the last fifth).
    #[arg(long, value_delimiter = ',')]
    pub test_pairs: Option<Vec<u32>>,

    /// Which side of the split to score.
    #[arg(long, value_enum, default_value_t = SplitSide::Test)]
    pub split: SplitSide,
}

pub fn eval(ctx: &Context, args: &EvalArgs) -> Result<()> {
    let corpus = ctx.load_normalized_corpus(args.corpus.as_deref())?;
    let test_pairs = args
        .test_pairs
        .clone()
        .unwrap_or_else(|| default_test_pairs(&corpus));
    let (train_side, test_side) = participant_split(&corpus, &test_pairs)?;
    let (side_label, clips) = match args.split {
        SplitSide::Train => ("train", train_side),
        SplitSide::Test => ("test", test_side),
    };
    if clips.is_empty() {
        bail!("{side_label} split is empty (held-out pairs {test_pairs:?})");
    }

    let kind = args.model;
    let checkpoint = Checkpoint::load(&ctx.checkpoint_path(args.checkpoint.as_deref(), kind))?;
    let csv = match kind {
        ModelKind::Svae => {
            let model = checkpoint.to_svae()?;
            let report = eval_svae(&model, &clips.clips)?;
            println!(
                "svae[{side_label}]: single_step_mae_cm={:.4} autoregressive_mae_cm={:.4}",
                report.overall.single_step_mae_cm, report.overall.autoregressive_mae_cm
            );
            report.to_csv()
        }
        ModelKind::Rot => {
            let model = checkpoint.to_rot()?;
            let report = eval_rot(&model, &clips.clips)?;
            println!(
                "rot[{side_label}]: mae_cm={:.4} meae_rad={:.6}",
                report.overall.mae_cm, report.overall.meae_rad
            );
            report.to_csv()
        }
        ModelKind::Timing => {
            let model = checkpoint.to_timing()?;
            let report = accuracy_report(&model, &clips.clips)?;
            println!(
                "timing[{side_label}]: segment_accuracy_pct={:.2} windows={} correct={}",
                report.overall.accuracy_pct().unwrap_or(f64::NAN),
                report.windows,
                report.windows_correct
            );
            report.to_csv()
        }
    };

    let path = ctx
        .out
        .join(format!("{}_eval_{side_label}.csv", kind.label()));
    super::write_output(&path, &csv)?;
    print!("{csv}");
    Ok(())
}
