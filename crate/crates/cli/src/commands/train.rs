//! `train`: fit one model on the participant-split corpus; write the
//! checkpoint and per-epoch CSV log, and print the final loss.

use super::{Context, ModelKind};
use crate::config::default_test_pairs;
use anyhow::{bail, Result};
use clap::Args;
use handover_core::checkpoint::Checkpoint;
use handover_core::dataio::participant_split;
use handover_core::rot::train_rot;
use handover_core::seeds::sub_seed;
use handover_core::svae::{train_stage1, train_stage2};
use handover_core::timing::train_timing;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(value_enum)]
    pub model: ModelKind,

    /// Corpus directory (default: <out>/corpus).
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    /// Participant pairs held out of training, comma separated
    /// (default: the last fifth of the pair ids).
    #[arg(long, value_delimiter = ',')]
    pub test_pairs: Option<Vec<u32>>,

    /// Override the epoch count (stage-1 epochs for svae).
    #[arg(long)]
    pub epochs: Option<usize>,
}

pub fn train(ctx: &Context, args: &TrainArgs) -> Result<()> {
    let corpus = ctx.load_normalized_corpus(args.corpus.as_deref())?;
    let test_pairs = args
        .test_pairs
        .clone()
        .unwrap_or_else(|| default_test_pairs(&corpus));
    let (train_side, test_side) = participant_split(&corpus, &test_pairs)?;
    if train_side.is_empty() {
        bail!("training split is empty; held-out pairs {test_pairs:?} cover the whole corpus");
    }
    log::info!(
        "split: {} train clips / {} test clips (held-out pairs {:?})",
        train_side.len(),
        test_side.len(),
        test_pairs
    );

    let kind = args.model;
    let seed = sub_seed(ctx.config.seed, &format!("train/{}", kind.label()));
    let checkpoint_path = ctx.checkpoint_path(None, kind);
    let final_loss = match kind {
        ModelKind::Svae => {
            let mut cfg = ctx.config.svae.clone();
            cfg.seed = seed;
            if let Some(epochs) = args.epochs {
                cfg.stage1_epochs = epochs;
            }
            let model = train_stage1(&train_side.clips, &cfg)?;
            let model = train_stage2(model, &train_side.clips, &cfg)?;

            let mut stage1 = String::from("epoch,lr,p,recon,kl,loss\n");
            let mut stage2 = String::from("epoch,lr,p,recon,kl,loss\n");
            for row in &model.log {
                let out = if row.stage == 1 { &mut stage1 } else { &mut stage2 };
                writeln!(
                    out,
                    "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    row.epoch, row.lr, row.p, row.recon, row.kl, row.loss
                )?;
            }
            super::write_output(&ctx.out.join("svae_stage1_log.csv"), &stage1)?;
            super::write_output(&ctx.out.join("svae_stage2_log.csv"), &stage2)?;
            Checkpoint::from_svae(&model).save(&checkpoint_path)?;
            model.log.last().map(|r| r.loss)
        }
        ModelKind::Rot => {
            let mut cfg = ctx.config.rot.clone();
            cfg.seed = seed;
            if let Some(epochs) = args.epochs {
                cfg.epochs = epochs;
            }
            let model = train_rot(&train_side.clips, &cfg)?;
            let mut log = String::from("epoch,lr,recon,kl,loss\n");
            for row in &model.log {
                writeln!(
                    log,
                    "{},{:.12e},{:.12e},{:.12e},{:.12e}",
                    row.epoch, row.lr, row.recon, row.kl, row.loss
                )?;
            }
            super::write_output(&ctx.out.join("rot_log.csv"), &log)?;
            Checkpoint::from_rot(&model).save(&checkpoint_path)?;
            model.log.last().map(|r| r.loss)
        }
        ModelKind::Timing => {
            let mut cfg = ctx.config.timing.clone();
            cfg.seed = seed;
            if let Some(epochs) = args.epochs {
                cfg.epochs = epochs;
            }
            let model = train_timing(&train_side.clips, &cfg)?;
            let mut log = String::from("epoch,lr,loss\n");
            for row in &model.log {
                writeln!(log, "{},{:.12e},{:.12e}", row.epoch, row.lr, row.loss)?;
            }
            super::write_output(&ctx.out.join("timing_log.csv"), &log)?;
            Checkpoint::from_timing(&model).save(&checkpoint_path)?;
            model.log.last().map(|r| r.loss)
        }
    };

    let final_loss = final_loss.ok_or_else(|| anyhow::anyhow!("trainer produced an empty log"))?;
    println!(
        "{}: checkpoint={} final_loss={:.12e}",
        kind.label(),
        checkpoint_path.display(),
        final_loss
    );
    Ok(())
}
