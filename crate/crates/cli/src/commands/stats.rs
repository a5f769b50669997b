//! `stats`: corpus statistics with CSV tables and SVG scatter plots.

use super::Context;
use anyhow::Result;
use clap::Args;
use handover_core::analysis::{handover_stats, points_csv, scatter_svg, ScatterView};
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Corpus directory (default: <out>/corpus).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

pub fn stats(ctx: &Context, args: &StatsArgs) -> Result<()> {
    let corpus = ctx.load_normalized_corpus(args.corpus.as_deref())?;
    let stats = handover_stats(&corpus.clips)?;
    for warning in &stats.warnings {
        log::warn!("{warning}");
    }

    super::write_output(&ctx.out.join("stats_summary.csv"), &stats.summary_csv())?;
    super::write_output(&ctx.out.join("rot_points.csv"), &points_csv(&stats.rot_points))?;
    super::write_output(
        &ctx.out.join("palm_points.csv"),
        &points_csv(&stats.palm_points),
    )?;
    for (points, label) in [(&stats.rot_points, "rot"), (&stats.palm_points, "palm")] {
        for view in [ScatterView::Front, ScatterView::Top] {
            let path = ctx.out.join(format!("{label}_scatter_{}.svg", view.label()));
            super::write_output(&path, &scatter_svg(points, view))?;
        }
    }

    println!(
        "stats: segments={} duration_mean_s={} duration_std_s={} rot_points={} palm_points={}",
        stats.segment_count,
        stats
            .duration_mean_s
            .map_or("n/a".into(), |v| format!("{v:.3}")),
        stats
            .duration_std_s
            .map_or("n/a".into(), |v| format!("{v:.3}")),
        stats.rot_points.len(),
        stats.palm_points.len(),
    );
    Ok(())
}
