//! Core clip types: annotated motion sequences of one primary user and one
//! robot end-effector, sampled at a fixed rate.

use crate::dataio::DataError;
use crate::kinematics::{forward_kinematics, Pose, Skeleton};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Phase of the handover interaction at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HandoverState {
    HandingOver,
    TakingBack,
    Idle,
}

impl HandoverState {
    pub const ALL: [HandoverState; 3] = [
        HandoverState::HandingOver,
        HandoverState::TakingBack,
        HandoverState::Idle,
    ];

    /// One-hot encoding in the fixed order HandingOver, TakingBack, Idle.
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            HandoverState::HandingOver => [1.0, 0.0, 0.0],
            HandoverState::TakingBack => [0.0, 1.0, 0.0],
            HandoverState::Idle => [0.0, 0.0, 1.0],
        }
    }

    pub fn is_idle(self) -> bool {
        self == HandoverState::Idle
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HandoverState::HandingOver => "handing_over",
            HandoverState::TakingBack => "taking_back",
            HandoverState::Idle => "idle",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DataError> {
        match s {
            "handing_over" => Ok(HandoverState::HandingOver),
            "taking_back" => Ok(HandoverState::TakingBack),
            "idle" => Ok(HandoverState::Idle),
            other => Err(DataError::Annotation(format!(
                "unknown handover state '{other}', expected one of handing_over, taking_back, idle"
            ))),
        }
    }
}

/// The 13 recorded activities (12 manual tasks plus a neutral standing pose).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Activity {
    MountMicrophone,
    SunscreenFace,
    LotionChest,
    ShampooHair,
    WashTorso,
    BlowDryHair,
    StraightenPictureLow,
    StraightenPictureHigh,
    HammerNail,
    CleanWindow,
    PaintWallLow,
    PaintWallHigh,
    NeutralPose,
}

impl Activity {
    pub const ALL: [Activity; 13] = [
        Activity::MountMicrophone,
        Activity::SunscreenFace,
        Activity::LotionChest,
        Activity::ShampooHair,
        Activity::WashTorso,
        Activity::BlowDryHair,
        Activity::StraightenPictureLow,
        Activity::StraightenPictureHigh,
        Activity::HammerNail,
        Activity::CleanWindow,
        Activity::PaintWallLow,
        Activity::PaintWallHigh,
        Activity::NeutralPose,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Activity::MountMicrophone => "mount_microphone",
            Activity::SunscreenFace => "sunscreen_face",
            Activity::LotionChest => "lotion_chest",
            Activity::ShampooHair => "shampoo_hair",
            Activity::WashTorso => "wash_torso",
            Activity::BlowDryHair => "blow_dry_hair",
            Activity::StraightenPictureLow => "straighten_picture_low",
            Activity::StraightenPictureHigh => "straighten_picture_high",
            Activity::HammerNail => "hammer_nail",
            Activity::CleanWindow => "clean_window",
            Activity::PaintWallLow => "paint_wall_low",
            Activity::PaintWallHigh => "paint_wall_high",
            Activity::NeutralPose => "neutral_pose",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DataError> {
        Activity::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| DataError::Annotation(format!("unknown activity label '{s}'")))
    }
}

impl std::fmt::Display for Activity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Who holds the object at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Possession {
    pub primary: bool,
    pub robot: bool,
}

impl Possession {
    pub fn as_str(self) -> &'static str {
        match (self.primary, self.robot) {
            (false, false) => "none",
            (true, false) => "primary",
            (false, true) => "robot",
            (true, true) => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DataError> {
        let (primary, robot) = match s {
            "none" => (false, false),
            "primary" => (true, false),
            "robot" => (false, true),
            "both" => (true, true),
            other => {
                return Err(DataError::Annotation(format!(
                    "unknown possession '{other}', expected one of none, primary, robot, both"
                )))
            }
        };
        Ok(Possession { primary, robot })
    }
}

/// Per-frame annotation attached to a clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub state: HandoverState,
    pub possession: Possession,
    /// Seconds since the enclosing handover segment began; 0 outside segments.
    pub time_in_segment: f64,
}

impl FrameAnnotation {
    pub fn idle() -> Self {
        FrameAnnotation {
            state: HandoverState::Idle,
            possession: Possession {
                primary: false,
                robot: false,
            },
            time_in_segment: 0.0,
        }
    }
}

/// One frame: primary-user pose plus the robot end-effector state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Frame {
    pub pose: Pose,
    pub ee_position: Vector3<f64>,
    pub ee_rotation: Matrix3<f64>,
}

/// An annotated motion sequence. All frames share `skeleton`; annotation
/// length always equals frame length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotionClip {
    pub name: String,
    pub activity: Activity,
    /// Participant-pair id the clip was recorded from; drives train/test splits.
    pub pair_id: u32,
    pub fps: f64,
    pub skeleton: Skeleton,
    pub frames: Vec<Frame>,
    pub annotations: Vec<FrameAnnotation>,
}

impl MotionClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Global joint positions of the primary user at `frame`.
    pub fn joint_positions(&self, frame: usize) -> Result<Vec<Vector3<f64>>, DataError> {
        Ok(forward_kinematics(
            &self.skeleton,
            &self.frames[frame].pose,
        )?)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.fps <= 0.0 {
            return Err(DataError::Annotation(format!(
                "clip '{}' has non-positive fps {}",
                self.name, self.fps
            )));
        }
        if self.annotations.len() != self.frames.len() {
            return Err(DataError::Annotation(format!(
                "clip '{}' has {} annotations for {} frames",
                self.name,
                self.annotations.len(),
                self.frames.len()
            )));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.pose.joint_angles.len() != self.skeleton.joint_count() {
                return Err(DataError::Annotation(format!(
                    "clip '{}' frame {i} has {} joints, skeleton has {}",
                    self.name,
                    frame.pose.joint_angles.len(),
                    self.skeleton.joint_count()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_order_is_fixed() {
        assert_eq!(HandoverState::HandingOver.one_hot(), [1.0, 0.0, 0.0]);
        assert_eq!(HandoverState::TakingBack.one_hot(), [0.0, 1.0, 0.0]);
        assert_eq!(HandoverState::Idle.one_hot(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn state_labels_round_trip() {
        for s in HandoverState::ALL {
            assert_eq!(HandoverState::parse(s.as_str()).unwrap(), s);
        }
        let err = HandoverState::parse("give").unwrap_err().to_string();
        assert!(err.contains("handing_over"), "error lists permitted values: {err}");
    }

    #[test]
    fn thirteen_activities_with_unique_labels() {
        assert_eq!(Activity::ALL.len(), 13);
        let mut labels: Vec<_> = Activity::ALL.iter().map(|a| a.label()).collect();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 13);
        for a in Activity::ALL {
            assert_eq!(Activity::parse(a.label()).unwrap(), a);
        }
    }

    #[test]
    fn possession_round_trips() {
        for primary in [false, true] {
            for robot in [false, true] {
                let p = Possession { primary, robot };
                assert_eq!(Possession::parse(p.as_str()).unwrap(), p);
            }
        }
    }
}
