//! Scripted user agents: clip playback as a per-tick pose stream.

use super::ControllerError;
use crate::dataio::clip::{Activity, HandoverState, MotionClip};
use crate::dataio::features::ClipFeatures;
use crate::dataio::{segment_handovers, synth_corpus, DataError, SynthConfig};
use crate::kinematics::normalize_clip;
use crate::rot::PALM_JOINT;
use nalgebra::Vector3;
use ndarray::ArrayView1;

/// Replays a clip frame by frame: the activity oscillation, the reach cue
/// and the handover annotations all come from the clip itself. Ticks past
/// the end hold the last frame.
pub struct ScriptedAgent {
    features: ClipFeatures,
    palm: usize,
    scenario: HandoverState,
    name: String,
}

impl ScriptedAgent {
    pub fn from_clip(clip: &MotionClip) -> Result<Self, ControllerError> {
        let palm = clip.skeleton.joint_index(PALM_JOINT).ok_or_else(|| {
            ControllerError::Config(format!("clip skeleton lacks the '{PALM_JOINT}' joint"))
        })?;
        // Controllers reason in the canonical hip frame, so recorded world
        // poses are normalized before feature extraction.
        let clip = normalize_clip(clip).map_err(DataError::from)?;
        let scenario = segment_handovers(&clip)?
            .first()
            .map(|seg| seg.kind)
            .unwrap_or(HandoverState::HandingOver);
        Ok(ScriptedAgent {
            features: ClipFeatures::compute(&clip)?,
            palm,
            scenario,
            name: clip.name.clone(),
        })
    }

    /// Canonical single-handover reach script: one synthetic clip of one
    /// activity with one handover, deterministic under `seed`.
    pub fn canonical_reach(seed: u64) -> Result<Self, ControllerError> {
        let config = SynthConfig {
            clips_per_activity: 1,
            handovers_per_clip: 1,
            n_pairs: 1,
            activities: vec![Activity::HammerNail],
            ..Default::default()
        };
        let corpus = synth_corpus(&config, seed)?;
        Self::from_clip(&corpus.clips[0])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Frames in the underlying clip.
    pub fn script_len(&self) -> usize {
        self.features.frames()
    }

    /// Handover kind of the episode: the clip's first segment.
    pub fn scenario(&self) -> HandoverState {
        self.scenario
    }

    /// The clip's own initial end-effector position (the rest pose).
    pub fn initial_ee(&self) -> Vector3<f64> {
        self.features.ee_relative(0)
    }

    fn frame_index(&self, tick: usize) -> usize {
        tick.min(self.features.frames() - 1)
    }

    /// Primary feature row the trackers observe at `tick`.
    pub fn h_row(&self, tick: usize) -> ArrayView1<'_, f64> {
        self.features.primary.row(self.frame_index(tick))
    }

    /// Palm position in the hip frame at `tick`.
    pub fn hand(&self, tick: usize) -> Vector3<f64> {
        let f = self.frame_index(tick);
        let cols = self.features.layout.joint_position_cols(self.palm);
        Vector3::new(
            self.features.primary[[f, cols.start]],
            self.features.primary[[f, cols.start + 1]],
            self.features.primary[[f, cols.start + 2]],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_reach_script_has_one_handover() {
        let agent = ScriptedAgent::canonical_reach(33).unwrap();
        assert!(agent.script_len() > 50);
        assert_eq!(agent.scenario(), HandoverState::HandingOver);
        // Rest pose: the end-effector starts at its parked position.
        let ee = agent.initial_ee();
        assert!((ee - Vector3::new(0.0, 0.0, 0.25)).norm() < 1e-9);
    }

    #[test]
    fn playback_is_clamped_to_the_last_frame() {
        let agent = ScriptedAgent::canonical_reach(33).unwrap();
        let last = agent.script_len() - 1;
        assert_eq!(agent.hand(last), agent.hand(last + 100));
        assert_eq!(agent.h_row(last), agent.h_row(last + 100));
    }

    #[test]
    fn hand_row_matches_palm_columns() {
        let agent = ScriptedAgent::canonical_reach(7).unwrap();
        let row = agent.h_row(10);
        let cols = agent.features.layout.joint_position_cols(agent.palm);
        let hand = agent.hand(10);
        assert_eq!(hand.x, row[cols.start]);
        assert_eq!(hand.y, row[cols.start + 1]);
        assert_eq!(hand.z, row[cols.start + 2]);
    }

    #[test]
    fn idle_clip_defaults_to_handing_over() {
        let clip = &crate::rot::train::tests::fixture_corpus()[0];
        let mut idle = clip.clone();
        for a in &mut idle.annotations {
            a.state = HandoverState::Idle;
        }
        let agent = ScriptedAgent::from_clip(&idle).unwrap();
        assert_eq!(agent.scenario(), HandoverState::HandingOver);
    }
}
