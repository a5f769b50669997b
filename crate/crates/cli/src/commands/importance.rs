//! `importance`: rank joints by mean gradient magnitude of a trained model.

use super::{Context, ModelKind};
use anyhow::{bail, Result};
use clap::Args;
use handover_core::analysis::joint_importance;
use handover_core::checkpoint::Checkpoint;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    #[arg(value_enum)]
    pub model: ModelKind,

    /// Checkpoint file (default: <out>/<model>.ckpt.json).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Corpus directory (default: <out>/corpus).
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    /// Frame stride between sampled windows.
    #[arg(long, default_value_t = 5)]
    pub stride: usize,
}

pub fn importance(ctx: &Context, args: &ImportanceArgs) -> Result<()> {
    if args.stride == 0 {
        bail!("stride must be at least 1");
    }
    let corpus = ctx.load_normalized_corpus(args.corpus.as_deref())?;
    let skeleton = match corpus.clips.first() {
        Some(clip) => clip.skeleton.clone(),
        None => bail!("corpus holds no clips"),
    };

    let kind = args.model;
    let checkpoint = Checkpoint::load(&ctx.checkpoint_path(args.checkpoint.as_deref(), kind))?;
    let table = match kind {
        ModelKind::Svae => {
            let model = checkpoint.to_svae()?;
            let windows = corpus.windows(model.config.t, args.stride)?;
            joint_importance(&model, &windows, &skeleton)?
        }
        ModelKind::Rot => {
            let model = checkpoint.to_rot()?;
            let windows = corpus.windows(model.config.t, args.stride)?;
            joint_importance(&model, &windows, &skeleton)?
        }
        ModelKind::Timing => {
            let model = checkpoint.to_timing()?;
            let windows = corpus.windows(model.config.t, args.stride)?;
            joint_importance(&model, &windows, &skeleton)?
        }
    };

    let csv = table.to_csv();
    let path = ctx.out.join(format!("importance_{}.csv", kind.label()));
    super::write_output(&path, &csv)?;
    for line in csv.lines().take(7) {
        println!("{line}");
    }
    Ok(())
}
