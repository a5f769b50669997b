//! `simulate`: run scripted handover episodes and log every tick.

use super::{Context, ModelKind};
use crate::config::Scenario;
use anyhow::{bail, Context as _, Result};
use clap::Args;
use handover_core::checkpoint::Checkpoint;
use handover_core::controller::{
    run_episode, BaselineController, EpisodeLog, HandsController, ScriptedAgent,
};
use handover_core::seeds::sub_seed;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario JSON naming the agent script, controller and seed.
    #[arg(long)]
    pub scenario: Option<PathBuf>,

    /// Controller override: baseline, hands or both.
    #[arg(long)]
    pub controller: Option<String>,

    /// Maximum episode length in ticks (overrides the scenario).
    #[arg(long)]
    pub ticks: Option<usize>,

    /// Corpus directory for clip-named agents (default: <out>/corpus).
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    /// SVAE checkpoint for the hands controller.
    #[arg(long)]
    pub svae_checkpoint: Option<PathBuf>,

    /// Timing checkpoint for the hands controller.
    #[arg(long)]
    pub timing_checkpoint: Option<PathBuf>,
}

fn build_agent(ctx: &Context, args: &SimulateArgs, scenario: &Scenario, seed: u64) -> Result<ScriptedAgent> {
    if scenario.agent == "canonical" {
        return Ok(ScriptedAgent::canonical_reach(sub_seed(seed, "simulate/agent"))?);
    }
    let corpus = ctx.load_normalized_corpus(args.corpus.as_deref())?;
    let clip = corpus
        .clips
        .iter()
        .find(|c| c.name == scenario.agent)
        .with_context(|| format!("no clip named '{}' in the corpus", scenario.agent))?;
    Ok(ScriptedAgent::from_clip(clip)?)
}

fn report(ctx: &Context, log: &EpisodeLog, summary: &mut String) -> Result<()> {
    let path = ctx.out.join(format!("episode_{}.jsonl", log.controller));
    super::write_output(&path, &log.to_jsonl())?;
    summary.push_str(&log.summary_csv_row());
    let final_distance = log.ticks.last().map(|t| {
        let d: f64 = t
            .ee
            .iter()
            .zip(t.user_hand.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d.sqrt()
    });
    println!(
        "episode controller={} agent={} completed={} ticks={} final_distance={}",
        log.controller,
        log.agent,
        log.outcome.completed,
        log.ticks.len(),
        final_distance.map_or("n/a".into(), |d| format!("{d:.4}")),
    );
    Ok(())
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<()> {
    let mut scenario = Scenario::load(args.scenario.as_deref())?;
    if let Some(controller) = &args.controller {
        scenario.controller = controller.clone();
    }
    if let Some(ticks) = args.ticks {
        scenario.max_ticks = ticks;
    }
    let seed = scenario.seed.unwrap_or(ctx.config.seed);
    let (run_baseline, run_hands) = match scenario.controller.as_str() {
        "baseline" => (true, false),
        "hands" => (false, true),
        "both" => (true, true),
        other => bail!("unknown controller '{other}' (use baseline, hands or both)"),
    };

    let agent = build_agent(ctx, args, &scenario, seed)?;
    let mut summary = String::from(EpisodeLog::summary_csv_header());

    if run_baseline {
        let mut controller = BaselineController::new(ctx.config.controller.clone())?;
        let log = run_episode(&mut controller, &agent, scenario.max_ticks)?;
        report(ctx, &log, &mut summary)?;
    }
    if run_hands {
        let svae = Checkpoint::load(&ctx.checkpoint_path(args.svae_checkpoint.as_deref(), ModelKind::Svae))?
            .to_svae()?;
        let timing = Checkpoint::load(
            &ctx.checkpoint_path(args.timing_checkpoint.as_deref(), ModelKind::Timing),
        )?
        .to_timing()?;
        let mut controller = HandsController::new(
            &timing,
            &svae,
            agent.scenario(),
            ctx.config.controller.stop_distance,
        )?;
        let log = run_episode(&mut controller, &agent, scenario.max_ticks)?;
        report(ctx, &log, &mut summary)?;
    }

    super::write_output(&ctx.out.join("episodes.csv"), &summary)?;
    Ok(())
}
