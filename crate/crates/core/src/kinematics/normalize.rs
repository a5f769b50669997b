//! Per-frame rigid normalization into the canonical hip frame.
//!
//! Every frame is translated so the hip sits at the origin and yawed about
//! the vertical axis so the hip's forward direction (local +z projected to
//! the horizontal plane) points along +x. The identical rigid transform is
//! applied to the robot end-effector state of that frame, so all intra-frame
//! geometry is preserved.

use super::{rot_y, KinematicsError};
use crate::dataio::clip::{Frame, MotionClip};
use nalgebra::{Matrix3, Vector3};

const VERTICAL_EPS: f64 = 1e-6;

/// Yaw angle (radians) to rotate about +y so the pose's forward axis points
/// along +x. Errors if the forward axis is vertical within 1e-6.
pub fn heading_yaw(root_rotation: &Matrix3<f64>) -> Result<f64, KinematicsError> {
    let forward = root_rotation * Vector3::z();
    let horizontal = Vector3::new(forward.x, 0.0, forward.z);
    if horizontal.norm() < VERTICAL_EPS {
        return Err(KinematicsError::DegenerateFacing);
    }
    Ok(horizontal.z.atan2(horizontal.x))
}

/// Rigid transform (R, t) with p ↦ R·p + t that sends this frame's hip to
/// the origin facing +x.
pub fn normalizing_transform(frame: &Frame) -> Result<(Matrix3<f64>, Vector3<f64>), KinematicsError> {
    let rot = rot_y(heading_yaw(&frame.pose.root_rotation)?);
    let t = -(rot * frame.pose.root_position);
    Ok((rot, t))
}

fn apply_transform(frame: &Frame, rot: &Matrix3<f64>, hip: &Vector3<f64>) -> Frame {
    let mut out = frame.clone();
    out.pose.root_position = Vector3::zeros();
    out.pose.root_rotation = rot * frame.pose.root_rotation;
    out.ee_position = rot * (frame.ee_position - hip);
    out.ee_rotation = rot * frame.ee_rotation;
    out
}

/// Normalize every frame of a clip into the canonical hip frame. Frames with
/// a vertical forward axis reuse the previous frame's yaw correction; a
/// degenerate first frame is an error.
pub fn normalize_clip(clip: &MotionClip) -> Result<MotionClip, KinematicsError> {
    if clip.frames.is_empty() {
        return Err(KinematicsError::EmptyClip);
    }
    let mut frames = Vec::with_capacity(clip.frames.len());
    let mut last_rot: Option<Matrix3<f64>> = None;
    for frame in &clip.frames {
        let rot = match heading_yaw(&frame.pose.root_rotation) {
            Ok(yaw) => rot_y(yaw),
            Err(KinematicsError::DegenerateFacing) => match last_rot {
                Some(r) => r,
                None => return Err(KinematicsError::DegenerateFacing),
            },
            Err(e) => return Err(e),
        };
        last_rot = Some(rot);
        frames.push(apply_transform(frame, &rot, &frame.pose.root_position));
    }
    Ok(MotionClip {
        frames,
        ..clip.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::clip::{Activity, FrameAnnotation, MotionClip};
    use crate::kinematics::{forward_kinematics, rot_x, synthetic_skeleton, Pose, Skeleton};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::FRAC_PI_2;

    fn clip_from_frames(skeleton: Skeleton, frames: Vec<Frame>) -> MotionClip {
        let annotations = vec![FrameAnnotation::idle(); frames.len()];
        MotionClip {
            name: "test".into(),
            activity: Activity::NeutralPose,
            pair_id: 0,
            fps: 25.0,
            skeleton,
            frames,
            annotations,
        }
    }

    fn frame_at(skeleton: &Skeleton, pos: Vector3<f64>, rot: Matrix3<f64>) -> Frame {
        Frame {
            pose: Pose::rest(skeleton, pos, rot),
            ee_position: Vector3::new(0.4, 1.1, 0.3),
            ee_rotation: Matrix3::identity(),
        }
    }

    #[test]
    fn heading_yaw_of_identity_is_quarter_turn() {
        // Identity root faces world +z; a +90 degree yaw brings it to +x.
        assert_abs_diff_eq!(heading_yaw(&Matrix3::identity()).unwrap(), FRAC_PI_2);
        assert_abs_diff_eq!(heading_yaw(&rot_y(FRAC_PI_2)).unwrap(), 0.0);
    }

    #[test]
    fn heading_yaw_detects_vertical_facing() {
        // rot_x(pi/2) sends local +z to (0,-1,0), straight down.
        assert!(matches!(
            heading_yaw(&rot_x(FRAC_PI_2)),
            Err(KinematicsError::DegenerateFacing)
        ));
    }

    #[test]
    fn translation_only_case() {
        // Facing already +x (root_rotation turns local +z onto world +x),
        // hip at (2,0,1): normalization reduces to translation by (-2,0,-1).
        let skel = synthetic_skeleton();
        let facing_x = rot_y(FRAC_PI_2);
        let frame = frame_at(&skel, Vector3::new(2.0, 0.0, 1.0), facing_x);
        let clip = clip_from_frames(skel.clone(), vec![frame.clone()]);
        let norm = normalize_clip(&clip).unwrap();

        let before = forward_kinematics(&skel, &frame.pose).unwrap();
        let after = forward_kinematics(&skel, &norm.frames[0].pose).unwrap();
        let shift = Vector3::new(-2.0, 0.0, -1.0);
        for (b, a) in before.iter().zip(&after) {
            assert_abs_diff_eq!(a, &(b + shift), epsilon = 1e-9);
        }
        assert_abs_diff_eq!(
            norm.frames[0].ee_position,
            frame.ee_position + shift,
            epsilon = 1e-9
        );
    }

    #[test]
    fn normalization_is_idempotent() {
        let skel = synthetic_skeleton();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let frames: Vec<Frame> = (0..10)
            .map(|_| {
                frame_at(
                    &skel,
                    Vector3::new(rng.gen_range(-2.0..2.0), 1.0, rng.gen_range(-2.0..2.0)),
                    rot_y(rng.gen_range(-3.0..3.0)) * rot_x(rng.gen_range(-0.3..0.3)),
                )
            })
            .collect();
        let clip = clip_from_frames(skel, frames);
        let once = normalize_clip(&clip).unwrap();
        let twice = normalize_clip(&once).unwrap();
        for (a, b) in once.frames.iter().zip(&twice.frames) {
            assert_abs_diff_eq!(a.pose.root_position, b.pose.root_position, epsilon = 1e-9);
            assert_abs_diff_eq!(a.pose.root_rotation, b.pose.root_rotation, epsilon = 1e-9);
            assert_abs_diff_eq!(a.ee_position, b.ee_position, epsilon = 1e-9);
        }
    }

    #[test]
    fn normalized_frames_face_plus_x_with_hip_at_origin() {
        let skel = synthetic_skeleton();
        let frame = frame_at(
            &skel,
            Vector3::new(-1.0, 0.9, 3.0),
            rot_y(2.2) * rot_x(0.1),
        );
        let clip = clip_from_frames(skel, vec![frame]);
        let norm = normalize_clip(&clip).unwrap();
        let pose = &norm.frames[0].pose;
        assert_abs_diff_eq!(pose.root_position, Vector3::zeros(), epsilon = 1e-12);
        let forward = pose.root_rotation * Vector3::z();
        assert_abs_diff_eq!(forward.z, 0.0, epsilon = 1e-9);
        assert!(forward.x > 0.0);
    }

    #[test]
    fn normalization_preserves_intra_frame_distances() {
        let skel = synthetic_skeleton();
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for _ in 0..20 {
            let mut frame = frame_at(
                &skel,
                Vector3::new(rng.gen_range(-2.0..2.0), 1.0, rng.gen_range(-2.0..2.0)),
                rot_y(rng.gen_range(-3.0..3.0)) * rot_x(rng.gen_range(-0.4..0.4)),
            );
            for angles in frame.pose.joint_angles.iter_mut().skip(1) {
                for a in angles.iter_mut() {
                    *a = rng.gen_range(-1.0..1.0);
                }
            }
            let clip = clip_from_frames(skel.clone(), vec![frame.clone()]);
            let norm = normalize_clip(&clip).unwrap();
            let before = forward_kinematics(&skel, &frame.pose).unwrap();
            let after = forward_kinematics(&skel, &norm.frames[0].pose).unwrap();
            let hand = skel.joint_index("right_hand").unwrap();
            assert_abs_diff_eq!(
                (before[hand] - frame.ee_position).norm(),
                (after[hand] - norm.frames[0].ee_position).norm(),
                epsilon = 1e-9
            );
            for (b, a) in before.iter().zip(&after) {
                assert_abs_diff_eq!(
                    (b - before[0]).norm(),
                    (a - after[0]).norm(),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn degenerate_first_frame_errors_later_frame_falls_back() {
        let skel = synthetic_skeleton();
        let vertical = frame_at(&skel, Vector3::zeros(), rot_x(FRAC_PI_2));
        let clip = clip_from_frames(skel.clone(), vec![vertical.clone()]);
        assert!(matches!(
            normalize_clip(&clip),
            Err(KinematicsError::DegenerateFacing)
        ));

        let ok = frame_at(&skel, Vector3::new(1.0, 0.0, 0.0), rot_y(0.7));
        let clip = clip_from_frames(skel, vec![ok.clone(), vertical]);
        let norm = normalize_clip(&clip).unwrap();
        // Frame 1 reuses frame 0's yaw fix: same rotation applied to its root.
        let yaw = heading_yaw(&ok.pose.root_rotation).unwrap();
        let expected = rot_y(yaw) * rot_x(FRAC_PI_2);
        assert_abs_diff_eq!(norm.frames[1].pose.root_rotation, expected, epsilon = 1e-12);
    }
}
