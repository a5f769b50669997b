//! Episode harness: controller and scripted agent stepped in lockstep.

use super::{
    BaselineController, ControllerError, HandsController, HandsStatus, ScriptedAgent,
};
use nalgebra::Vector3;
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Result of one controller tick.
pub struct ControllerTick {
    pub ee: Vector3<f64>,
    pub state: &'static str,
    pub handover_detected: bool,
    pub stopped: bool,
}

/// Anything the episode harness can step.
pub trait Controller {
    fn name(&self) -> &'static str;
    fn tick(
        &mut self,
        h_row: ArrayView1<f64>,
        user_hand: Vector3<f64>,
        ee: Vector3<f64>,
    ) -> Result<ControllerTick, ControllerError>;
}

impl Controller for BaselineController {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn tick(
        &mut self,
        _h_row: ArrayView1<f64>,
        user_hand: Vector3<f64>,
        ee: Vector3<f64>,
    ) -> Result<ControllerTick, ControllerError> {
        let (next, status) = self.step(user_hand, ee)?;
        Ok(ControllerTick {
            ee: next,
            state: status.label(),
            handover_detected: status != super::BaselineStatus::Inactive,
            stopped: status == super::BaselineStatus::Stopped,
        })
    }
}

impl Controller for HandsController<'_> {
    fn name(&self) -> &'static str {
        "hands"
    }

    fn tick(
        &mut self,
        h_row: ArrayView1<f64>,
        user_hand: Vector3<f64>,
        ee: Vector3<f64>,
    ) -> Result<ControllerTick, ControllerError> {
        let (next, status, detected) = self.step(h_row, user_hand, ee)?;
        Ok(ControllerTick {
            ee: next,
            state: status.label(),
            handover_detected: detected,
            stopped: status == HandsStatus::Stopped,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub user_hand: [f64; 3],
    pub ee: [f64; 3],
    pub controller_state: String,
    pub handover_detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub completed: bool,
    pub completion_tick: Option<usize>,
    /// Total end-effector travel from its initial position (meters).
    pub path_length: f64,
    /// Mean norm of the third finite difference of the end-effector track.
    pub mean_jerk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub controller: String,
    pub agent: String,
    pub ticks: Vec<TickRecord>,
    pub outcome: EpisodeOutcome,
}

#[derive(Serialize)]
struct OutcomeLine<'a> {
    outcome: &'a EpisodeOutcome,
}

impl EpisodeLog {
    /// One JSON object per tick, then one closing line with the outcome.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.ticks {
            let line = serde_json::to_string(t).expect("tick records serialize");
            let _ = writeln!(&mut out, "{line}");
        }
        let line = serde_json::to_string(&OutcomeLine {
            outcome: &self.outcome,
        })
        .expect("outcome serializes");
        let _ = writeln!(&mut out, "{line}");
        out
    }

    pub fn summary_csv_header() -> &'static str {
        "controller,agent,completed,completion_tick,ticks,path_length_m,mean_jerk\n"
    }

    pub fn summary_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6}\n",
            self.controller,
            self.agent,
            self.outcome.completed,
            self.outcome
                .completion_tick
                .map(|t| t.to_string())
                .unwrap_or_default(),
            self.ticks.len(),
            self.outcome.path_length,
            self.outcome.mean_jerk,
        )
    }
}

fn as_array(v: Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Norm of the mean |third finite difference| over a position track.
fn mean_jerk(track: &[Vector3<f64>]) -> f64 {
    if track.len() < 4 {
        return 0.0;
    }
    let diffs: Vec<f64> = (3..track.len())
        .map(|i| (track[i] - 3.0 * track[i - 1] + 3.0 * track[i - 2] - track[i - 3]).norm())
        .collect();
    diffs.iter().sum::<f64>() / diffs.len() as f64
}

/// Step the controller against the agent for at most `max_ticks`, stopping
/// early when the controller halts. Deterministic: same controller state,
/// agent and tick budget give the identical log.
pub fn run_episode(
    controller: &mut dyn Controller,
    agent: &ScriptedAgent,
    max_ticks: usize,
) -> Result<EpisodeLog, ControllerError> {
    let mut ee = agent.initial_ee();
    let mut ticks = Vec::new();
    let mut track = vec![ee];
    let mut completion_tick = None;
    for tick in 0..max_ticks {
        let hand = agent.hand(tick);
        let result = controller.tick(agent.h_row(tick), hand, ee)?;
        ee = result.ee;
        track.push(ee);
        ticks.push(TickRecord {
            tick,
            user_hand: as_array(hand),
            ee: as_array(ee),
            controller_state: result.state.to_string(),
            handover_detected: result.handover_detected,
        });
        if result.stopped {
            completion_tick = Some(tick);
            break;
        }
    }
    let path_length = track.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    Ok(EpisodeLog {
        controller: controller.name().to_string(),
        agent: agent.name().to_string(),
        outcome: EpisodeOutcome {
            completed: completion_tick.is_some(),
            completion_tick,
            path_length,
            mean_jerk: mean_jerk(&track),
        },
        ticks,
    })
}
