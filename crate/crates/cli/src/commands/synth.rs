//! `synth-data`: generate the synthetic mocap corpus and save it to disk.

use super::Context;
use anyhow::Result;
use clap::Args;
use handover_core::dataio::{save_corpus, segment_handovers, synth_corpus};

#[derive(Args, Debug)]
pub struct SynthDataArgs {
    /// Clips per activity (overrides the config's data section).
    #[arg(long)]
    pub clips_per_activity: Option<usize>,

    /// Handover segments per clip (overrides the config).
    #[arg(long)]
    pub handovers_per_clip: Option<usize>,

    /// Participant pairs (overrides the config).
    #[arg(long)]
    pub pairs: Option<u32>,
}

pub fn synth_data(ctx: &Context, args: &SynthDataArgs) -> Result<()> {
    let mut data = ctx.config.data.clone();
    if let Some(n) = args.clips_per_activity {
        data.clips_per_activity = n;
    }
    if let Some(n) = args.handovers_per_clip {
        data.handovers_per_clip = n;
    }
    if let Some(n) = args.pairs {
        data.n_pairs = n;
    }

    let corpus = synth_corpus(&data, ctx.config.seed)?;
    let mut segments = 0;
    for clip in &corpus.clips {
        segments += segment_handovers(clip)?.len();
    }
    let dir = ctx.out.join("corpus");
    save_corpus(&corpus, &dir)?;
    println!(
        "corpus: clips={} frames={} pairs={} handover_segments={} dir={}",
        corpus.len(),
        corpus.total_frames(),
        corpus.pair_ids().len(),
        segments,
        dir.display()
    );
    Ok(())
}
