//! Serialization of clip frames into flat model features.
//!
//! Per frame the primary user contributes, for every joint, its root-relative
//! global position (3 values) followed by its local rotation in 6D form
//! (6 values). The robot end-effector contributes its root-relative position
//! and 6D rotation (9 values). Root-relative means the hip position of the
//! same frame is subtracted; orientation is left as-is because clips are
//! heading-normalized before feature extraction.

use crate::dataio::clip::MotionClip;
use crate::dataio::DataError;
use crate::kinematics::{forward_kinematics_full, matrix_to_6d};
use nalgebra::Vector3;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Column layout of the per-frame feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureLayout {
    pub joint_count: usize,
}

impl FeatureLayout {
    pub const PER_JOINT: usize = 9;
    pub const ROBOT_WIDTH: usize = 9;

    pub fn primary_width(&self) -> usize {
        Self::PER_JOINT * self.joint_count
    }

    pub fn frame_width(&self) -> usize {
        self.primary_width() + Self::ROBOT_WIDTH
    }

    /// Columns of joint `j`'s root-relative position within the primary block.
    pub fn joint_position_cols(&self, j: usize) -> Range<usize> {
        let base = Self::PER_JOINT * j;
        base..base + 3
    }

    /// Columns of joint `j`'s 6D rotation within the primary block.
    pub fn joint_rotation_cols(&self, j: usize) -> Range<usize> {
        let base = Self::PER_JOINT * j;
        base + 3..base + 9
    }
}

/// Features of every frame of one clip, computed once so windows can slice
/// them without repeating forward kinematics.
#[derive(Debug, Clone)]
pub struct ClipFeatures {
    pub layout: FeatureLayout,
    /// frames x (9 * joints), root-relative positions and 6D local rotations.
    pub primary: Array2<f64>,
    /// frames x 9, root-relative EE position and 6D rotation.
    pub robot: Array2<f64>,
    /// World hip position per frame, for mapping predictions back.
    pub root_positions: Vec<Vector3<f64>>,
    pub fps: f64,
}

impl ClipFeatures {
    pub fn compute(clip: &MotionClip) -> Result<Self, DataError> {
        clip.validate()?;
        let layout = FeatureLayout {
            joint_count: clip.skeleton.joint_count(),
        };
        let frames = clip.len();
        let mut primary = Array2::zeros((frames, layout.primary_width()));
        let mut robot = Array2::zeros((frames, FeatureLayout::ROBOT_WIDTH));
        let mut root_positions = Vec::with_capacity(frames);
        for (f, frame) in clip.frames.iter().enumerate() {
            let transforms = forward_kinematics_full(&clip.skeleton, &frame.pose)?;
            let root = frame.pose.root_position;
            root_positions.push(root);
            for j in 0..layout.joint_count {
                let rel = transforms.positions[j] - root;
                let base = FeatureLayout::PER_JOINT * j;
                primary[[f, base]] = rel.x;
                primary[[f, base + 1]] = rel.y;
                primary[[f, base + 2]] = rel.z;
                let local = frame.pose.local_rotation(&clip.skeleton, j);
                let r6 = matrix_to_6d(&local)?;
                for (k, v) in r6.v.iter().enumerate() {
                    primary[[f, base + 3 + k]] = *v;
                }
            }
            let rel = frame.ee_position - root;
            robot[[f, 0]] = rel.x;
            robot[[f, 1]] = rel.y;
            robot[[f, 2]] = rel.z;
            let r6 = matrix_to_6d(&frame.ee_rotation)?;
            for (k, v) in r6.v.iter().enumerate() {
                robot[[f, 3 + k]] = *v;
            }
        }
        Ok(ClipFeatures {
            layout,
            primary,
            robot,
            root_positions,
            fps: clip.fps,
        })
    }

    /// Root-relative EE position at `frame`, read back out of the features.
    pub fn ee_relative(&self, frame: usize) -> Vector3<f64> {
        Vector3::new(
            self.robot[[frame, 0]],
            self.robot[[frame, 1]],
            self.robot[[frame, 2]],
        )
    }

    pub fn frames(&self) -> usize {
        self.primary.nrows()
    }
}

/// Feature vectors (primary, robot) of a single frame.
pub fn frame_features(clip: &MotionClip, frame: usize) -> Result<(Vec<f64>, Vec<f64>), DataError> {
    let features = ClipFeatures::compute(clip)?;
    Ok((
        features.primary.row(frame).to_vec(),
        features.robot.row(frame).to_vec(),
    ))
}
