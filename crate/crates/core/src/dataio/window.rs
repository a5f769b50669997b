//! Symmetric training windows around a center frame.
//!
//! A window at center t exposes the seen past [t-T, t] and the future
//! (t, t+T] of both the primary user features and the robot EE features.
//! Valid centers run from T to len-T-2 so every future step has a
//! next-frame supervision target inside the clip.

use crate::dataio::clip::{Activity, HandoverState, MotionClip};
use crate::dataio::features::ClipFeatures;
use crate::dataio::DataError;
use nalgebra::Vector3;
use ndarray::ArrayView2;
use std::sync::Arc;

/// One model window. Feature rows are shared with all windows of the same
/// clip; accessors return views into the per-clip feature matrices.
#[derive(Debug, Clone)]
pub struct MotionWindow {
    features: Arc<ClipFeatures>,
    /// Center frame t within the source clip.
    pub center: usize,
    /// Half-width T in frames.
    pub t: usize,
    /// Handover state at the center frame.
    pub state: HandoverState,
    pub activity: Activity,
    pub pair_id: u32,
}

impl MotionWindow {
    /// Primary features over [t-T, t], shape (T+1, 9*joints).
    pub fn h_seen(&self) -> ArrayView2<'_, f64> {
        self.features
            .primary
            .slice(ndarray::s![self.center - self.t..=self.center, ..])
    }

    /// Primary features over (t, t+T], shape (T, 9*joints).
    pub fn h_future(&self) -> ArrayView2<'_, f64> {
        self.features
            .primary
            .slice(ndarray::s![self.center + 1..=self.center + self.t, ..])
    }

    /// Robot EE features over [t-T, t], shape (T+1, 9).
    pub fn r_seen(&self) -> ArrayView2<'_, f64> {
        self.features
            .robot
            .slice(ndarray::s![self.center - self.t..=self.center, ..])
    }

    /// Robot EE features over (t, t+T], shape (T, 9).
    pub fn r_future(&self) -> ArrayView2<'_, f64> {
        self.features
            .robot
            .slice(ndarray::s![self.center + 1..=self.center + self.t, ..])
    }

    /// Primary features over the whole window [t-T, t+T], shape (2T+1, 9*joints).
    pub fn h_full(&self) -> ArrayView2<'_, f64> {
        self.features
            .primary
            .slice(ndarray::s![self.center - self.t..=self.center + self.t, ..])
    }

    /// Robot EE features over [t-T, t+T], shape (2T+1, 9).
    pub fn r_full(&self) -> ArrayView2<'_, f64> {
        self.features
            .robot
            .slice(ndarray::s![self.center - self.t..=self.center + self.t, ..])
    }

    /// Supervision target: the robot EE position at frame t+1 (root-relative).
    pub fn target_next_ee(&self) -> Vector3<f64> {
        self.features.ee_relative(self.center + 1)
    }

    /// Per-step EE targets for frames t+1 ..= t+T.
    pub fn future_targets(&self) -> Vec<Vector3<f64>> {
        (1..=self.t)
            .map(|i| self.features.ee_relative(self.center + i))
            .collect()
    }

    pub fn clip_features(&self) -> &Arc<ClipFeatures> {
        &self.features
    }
}

/// All windows of a clip at stride 1.
pub fn make_windows(clip: &MotionClip, t: usize) -> Result<Vec<MotionWindow>, DataError> {
    make_windows_strided(clip, t, 1)
}

/// Windows whose centers step by `stride` frames (training throughput knob).
pub fn make_windows_strided(
    clip: &MotionClip,
    t: usize,
    stride: usize,
) -> Result<Vec<MotionWindow>, DataError> {
    let needed = 2 * t + 2;
    if clip.len() < needed {
        return Err(DataError::ClipTooShort {
            name: clip.name.clone(),
            frames: clip.len(),
            needed,
        });
    }
    if stride == 0 {
        return Err(DataError::Config("window stride must be positive".into()));
    }
    let features = Arc::new(ClipFeatures::compute(clip)?);
    Ok((t..=clip.len() - t - 2)
        .step_by(stride)
        .map(|center| MotionWindow {
            features: Arc::clone(&features),
            center,
            t,
            state: clip.annotations[center].state,
            activity: clip.activity,
            pair_id: clip.pair_id,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::clip::{Frame, FrameAnnotation};
    use crate::kinematics::{synthetic_skeleton, Pose};
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn wavy_clip(frames: usize) -> MotionClip {
        let skeleton = synthetic_skeleton();
        let frames: Vec<Frame> = (0..frames)
            .map(|i| Frame {
                pose: Pose::rest(&skeleton, Vector3::new(0.0, 1.0, 0.0), Matrix3::identity()),
                ee_position: Vector3::new(0.3 * (i as f64 * 0.1).sin(), 1.0, 0.25),
                ee_rotation: Matrix3::identity(),
            })
            .collect();
        let annotations = vec![FrameAnnotation::idle(); frames.len()];
        MotionClip {
            name: "wavy".into(),
            activity: Activity::HammerNail,
            pair_id: 3,
            fps: 25.0,
            skeleton,
            frames,
            annotations,
        }
    }

    #[test]
    fn shortest_admissible_clip_yields_one_window() {
        let clip = wavy_clip(52);
        let windows = make_windows(&clip, 25).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].center, 25);
    }

    #[test]
    fn hundred_frames_give_49_centers_25_through_73() {
        let clip = wavy_clip(100);
        let windows = make_windows(&clip, 25).unwrap();
        assert_eq!(windows.len(), 49);
        assert_eq!(windows[0].center, 25);
        assert_eq!(windows[windows.len() - 1].center, 73);
    }

    #[test]
    fn too_short_clip_is_rejected_not_padded() {
        let clip = wavy_clip(51);
        match make_windows(&clip, 25) {
            Err(DataError::ClipTooShort { frames, needed, .. }) => {
                assert_eq!(frames, 51);
                assert_eq!(needed, 52);
            }
            other => panic!("expected ClipTooShort, got {other:?}"),
        }
    }

    #[test]
    fn window_shapes_follow_feature_layout() {
        let clip = wavy_clip(60);
        let windows = make_windows(&clip, 25).unwrap();
        let w = &windows[0];
        assert_eq!(w.h_seen().dim(), (26, 9 * 17));
        assert_eq!(w.h_future().dim(), (25, 9 * 17));
        assert_eq!(w.r_seen().dim(), (26, 9));
        assert_eq!(w.r_future().dim(), (25, 9));
        assert_eq!(w.h_full().dim(), (51, 9 * 17));
        assert_eq!(w.r_full().dim(), (51, 9));
    }

    #[test]
    fn full_window_is_seen_plus_future() {
        let clip = wavy_clip(60);
        let w = &make_windows(&clip, 25).unwrap()[0];
        let full = w.r_full();
        let seen = w.r_seen();
        let future = w.r_future();
        for i in 0..seen.nrows() {
            assert_eq!(full.row(i), seen.row(i));
        }
        for i in 0..future.nrows() {
            assert_eq!(full.row(seen.nrows() + i), future.row(i));
        }
    }

    #[test]
    fn concatenated_targets_reproduce_the_ee_track() {
        let clip = wavy_clip(80);
        let t = 25;
        let windows = make_windows(&clip, t).unwrap();
        let features = ClipFeatures::compute(&clip).unwrap();
        for (k, w) in windows.iter().enumerate() {
            assert_abs_diff_eq!(
                w.target_next_ee(),
                features.ee_relative(t + 1 + k),
                epsilon = 1e-12
            );
        }
        // Future targets line up with the same track, shifted per step.
        let targets = windows[0].future_targets();
        assert_eq!(targets.len(), t);
        for (i, target) in targets.iter().enumerate() {
            assert_abs_diff_eq!(target, &features.ee_relative(t + 1 + i), epsilon = 1e-12);
        }
    }

    #[test]
    fn stride_subsamples_centers() {
        let clip = wavy_clip(100);
        let windows = make_windows_strided(&clip, 25, 5).unwrap();
        let centers: Vec<usize> = windows.iter().map(|w| w.center).collect();
        assert_eq!(centers, vec![25, 30, 35, 40, 45, 50, 55, 60, 65, 70]);
    }
}
