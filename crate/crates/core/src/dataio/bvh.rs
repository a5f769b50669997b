//! BVH motion-capture ingest.
//!
//! Supports the common grammar subset: HIERARCHY with ROOT/JOINT/End Site
//! blocks carrying OFFSET and CHANNELS ({X,Y,Z}{position,rotation}), then a
//! MOTION block with Frames, Frame Time and one whitespace-separated float
//! row per frame. Rotations are interpreted as intrinsic rotations applied
//! in channel order; offsets and position channels are scaled by a unit
//! factor (default 0.01 for centimeter files). Position channels on
//! non-root joints are accepted but ignored since poses carry only a root
//! translation. End Sites are consumed and dropped.

use crate::dataio::clip::{Activity, Frame, FrameAnnotation, MotionClip};
use crate::dataio::DataError;
use crate::kinematics::{
    forward_kinematics_full, matrix_from_axis_angles, DofAxis, JointSpec, Pose, Skeleton,
};
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    fn parse(s: &str, line: usize) -> Result<Self, DataError> {
        Ok(match s {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            other => {
                return Err(err(line, format!("unsupported channel '{other}'")));
            }
        })
    }

    fn rotation_axis(self) -> Option<DofAxis> {
        match self {
            Channel::Xrotation => Some(DofAxis::X),
            Channel::Yrotation => Some(DofAxis::Y),
            Channel::Zrotation => Some(DofAxis::Z),
            _ => None,
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> DataError {
    DataError::Bvh {
        line,
        message: message.into(),
    }
}

/// Parse a BVH document with the default centimeter-to-meter scale.
pub fn parse_bvh(text: &str) -> Result<(Skeleton, MotionClip), DataError> {
    parse_bvh_scaled(text, 0.01)
}

/// Parse a BVH document, scaling offsets and positions by `unit_scale`.
pub fn parse_bvh_scaled(text: &str, unit_scale: f64) -> Result<(Skeleton, MotionClip), DataError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut next = || lines.next().ok_or(err(0, "unexpected end of document"));

    let (line_no, line) = next()?;
    if line != "HIERARCHY" {
        return Err(err(line_no, format!("expected HIERARCHY, found '{line}'")));
    }

    let mut joints: Vec<JointSpec> = Vec::new();
    let mut channels: Vec<Vec<Channel>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut last_defined: Option<usize> = None;
    let mut warned_nonroot_position = false;

    let motion_line;
    loop {
        let (line_no, line) = next()?;
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or("");
        match keyword {
            "ROOT" | "JOINT" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| err(line_no, format!("{keyword} without a name")))?;
                if keyword == "ROOT" && !joints.is_empty() {
                    return Err(err(line_no, "multiple ROOT declarations"));
                }
                if keyword == "JOINT" && stack.is_empty() {
                    return Err(err(line_no, "JOINT outside of a block"));
                }
                joints.push(JointSpec {
                    name: name.to_string(),
                    parent: stack.last().copied(),
                    offset: Vector3::zeros(),
                    dof_axes: Vec::new(),
                });
                channels.push(Vec::new());
                last_defined = Some(joints.len() - 1);
            }
            "{" => {
                let idx = last_defined
                    .take()
                    .ok_or_else(|| err(line_no, "unexpected '{'"))?;
                stack.push(idx);
            }
            "}" => {
                if stack.pop().is_none() {
                    return Err(err(line_no, "unbalanced '}'"));
                }
            }
            "OFFSET" => {
                let idx = *stack
                    .last()
                    .ok_or_else(|| err(line_no, "OFFSET outside of a block"))?;
                let values: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(line_no, format!("bad OFFSET value: {e}")))?;
                if values.len() != 3 {
                    return Err(err(line_no, "OFFSET requires exactly 3 values"));
                }
                joints[idx].offset = Vector3::new(values[0], values[1], values[2]) * unit_scale;
            }
            "CHANNELS" => {
                let idx = *stack
                    .last()
                    .ok_or_else(|| err(line_no, "CHANNELS outside of a block"))?;
                let count: usize = tokens
                    .next()
                    .ok_or_else(|| err(line_no, "CHANNELS without a count"))?
                    .parse()
                    .map_err(|e| err(line_no, format!("bad channel count: {e}")))?;
                let parsed: Vec<Channel> = tokens
                    .map(|t| Channel::parse(t, line_no))
                    .collect::<Result<_, _>>()?;
                if parsed.len() != count {
                    return Err(err(
                        line_no,
                        format!("CHANNELS declares {count} but lists {}", parsed.len()),
                    ));
                }
                joints[idx].dof_axes = parsed
                    .iter()
                    .filter_map(|c| c.rotation_axis())
                    .map(|a| (a, -TAU, TAU))
                    .collect();
                channels[idx] = parsed;
            }
            "End" => {
                // End Site block: consume its braces and offset.
                let (l, open) = next()?;
                if open != "{" {
                    return Err(err(l, "End Site without '{'"));
                }
                loop {
                    let (l, inner) = next()?;
                    if inner == "}" {
                        break;
                    }
                    if !inner.starts_with("OFFSET") {
                        return Err(err(l, format!("unexpected '{inner}' in End Site")));
                    }
                }
            }
            "MOTION" => {
                if !stack.is_empty() {
                    return Err(err(line_no, "MOTION before hierarchy blocks closed"));
                }
                motion_line = line_no;
                break;
            }
            other => {
                return Err(err(line_no, format!("unexpected token '{other}'")));
            }
        }
    }
    if joints.is_empty() {
        return Err(err(motion_line, "no joints declared before MOTION"));
    }

    let (l, frames_line) = next()?;
    let frame_count: usize = frames_line
        .strip_prefix("Frames:")
        .ok_or_else(|| err(l, format!("expected 'Frames:', found '{frames_line}'")))?
        .trim()
        .parse()
        .map_err(|e| err(l, format!("bad frame count: {e}")))?;
    let (l, time_line) = next()?;
    let frame_time: f64 = time_line
        .strip_prefix("Frame Time:")
        .ok_or_else(|| err(l, format!("expected 'Frame Time:', found '{time_line}'")))?
        .trim()
        .parse()
        .map_err(|e| err(l, format!("bad frame time: {e}")))?;
    if frame_time <= 0.0 {
        return Err(err(l, "frame time must be positive"));
    }
    let fps = (1.0 / frame_time).round();

    let skeleton = Skeleton::new(joints).map_err(DataError::Kinematics)?;
    let total_channels: usize = channels.iter().map(|c| c.len()).sum();

    let mut frames: Vec<Frame> = Vec::with_capacity(frame_count);
    let mut clamped_total = 0usize;
    for row in 0..frame_count {
        let (line_no, line) = lines.next().ok_or_else(|| {
            err(
                motion_line,
                format!("expected {frame_count} frames, found {row}"),
            )
        })?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(line_no, format!("bad motion value: {e}")))?;
        if values.len() != total_channels {
            return Err(err(
                line_no,
                format!(
                    "frame has {} values but hierarchy declares {total_channels} channels",
                    values.len()
                ),
            ));
        }
        let mut pose = Pose::rest(&skeleton, Vector3::zeros(), Matrix3::identity());
        let mut cursor = 0usize;
        for (j, joint_channels) in channels.iter().enumerate() {
            let mut angles = Vec::new();
            for channel in joint_channels {
                let value = values[cursor];
                cursor += 1;
                match channel {
                    Channel::Xposition | Channel::Yposition | Channel::Zposition => {
                        if j == 0 {
                            let scaled = value * unit_scale;
                            match channel {
                                Channel::Xposition => pose.root_position.x = scaled,
                                Channel::Yposition => pose.root_position.y = scaled,
                                _ => pose.root_position.z = scaled,
                            }
                        } else if !warned_nonroot_position {
                            log::warn!(
                                "ignoring position channels on non-root joint '{}'",
                                skeleton.joints()[j].name
                            );
                            warned_nonroot_position = true;
                        }
                    }
                    _ => angles.push(value.to_radians()),
                }
            }
            pose.joint_angles[j] = angles;
        }
        let root_axes: Vec<DofAxis> = skeleton.joints()[0]
            .dof_axes
            .iter()
            .map(|&(a, _, _)| a)
            .collect();
        pose.root_rotation = matrix_from_axis_angles(&root_axes, &pose.joint_angles[0]);
        clamped_total += pose.clamp_to_limits(&skeleton);
        frames.push(Frame {
            pose,
            ee_position: Vector3::zeros(),
            ee_rotation: Matrix3::identity(),
        });
    }
    if let Some((line_no, extra)) = lines.next() {
        if extra.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-') {
            return Err(err(
                line_no,
                format!("expected {frame_count} frames, found more motion rows"),
            ));
        }
    }
    if clamped_total > 0 {
        log::warn!("clamped {clamped_total} joint angles into DoF limits during BVH ingest");
    }

    let annotations = vec![FrameAnnotation::idle(); frames.len()];
    let clip = MotionClip {
        name: "bvh".into(),
        activity: Activity::NeutralPose,
        pair_id: 0,
        fps,
        skeleton: skeleton.clone(),
        frames,
        annotations,
    };
    Ok((skeleton, clip))
}

/// Copy a robot participant's hand trajectory into `primary` as the robot
/// end-effector track. Only the named hand joint of the robot clip is
/// consumed; everything else is ignored.
pub fn attach_robot_ee(
    primary: &mut MotionClip,
    robot: &MotionClip,
    hand_joint: &str,
) -> Result<(), DataError> {
    if robot.len() != primary.len() {
        return Err(DataError::Annotation(format!(
            "robot clip has {} frames, primary has {}",
            robot.len(),
            primary.len()
        )));
    }
    let hand = robot.skeleton.joint_index(hand_joint).ok_or_else(|| {
        DataError::Annotation(format!("robot skeleton has no joint '{hand_joint}'"))
    })?;
    for (dst, src) in primary.frames.iter_mut().zip(&robot.frames) {
        let transforms = forward_kinematics_full(&robot.skeleton, &src.pose)?;
        dst.ee_position = transforms.positions[hand];
        dst.ee_rotation = transforms.rotations[hand];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;
    use approx::assert_abs_diff_eq;

    const TWO_JOINT: &str = "\
HIERARCHY
ROOT hips
{
  OFFSET 0.0 0.0 0.0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT spine
  {
    OFFSET 0.0 100.0 0.0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0.0 10.0 0.0
    }
  }
}
MOTION
Frames: 1
Frame Time: 0.04
0 0 0 0 0 0 0 0 0
";

    #[test]
    fn minimal_fixture_parses_to_identity() {
        let (skeleton, clip) = parse_bvh(TWO_JOINT).unwrap();
        assert_eq!(skeleton.joint_count(), 2);
        assert_eq!(skeleton.joints()[1].name, "spine");
        assert_abs_diff_eq!(
            skeleton.joints()[1].offset,
            Vector3::new(0.0, 1.0, 0.0),
            epsilon = 1e-12
        );
        assert_eq!(clip.fps, 25.0);
        assert_eq!(clip.len(), 1);
        let pose = &clip.frames[0].pose;
        assert_abs_diff_eq!(pose.root_position, Vector3::zeros(), epsilon = 1e-12);
        assert_abs_diff_eq!(pose.root_rotation, Matrix3::identity(), epsilon = 1e-12);
        let positions = forward_kinematics(&skeleton, pose).unwrap();
        assert_abs_diff_eq!(positions[1], Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn root_z_rotation_matches_hand_derived_fk() {
        let text = TWO_JOINT.replace(
            "0 0 0 0 0 0 0 0 0",
            "0 0 0 90 0 0 0 0 0",
        );
        let fixture = text.replace("OFFSET 0.0 100.0 0.0", "OFFSET 100.0 0.0 0.0");
        let (skeleton, clip) = parse_bvh(&fixture).unwrap();
        let positions = forward_kinematics(&skeleton, &clip.frames[0].pose).unwrap();
        // Rz(90 deg) applied to the (1,0,0) offset lands on (0,1,0).
        assert_abs_diff_eq!(positions[1], Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn truncated_motion_names_expected_and_actual() {
        let text = TWO_JOINT.replace("Frames: 1", "Frames: 3");
        let message = parse_bvh(&text).unwrap_err().to_string();
        assert!(message.contains("expected 3 frames"), "{message}");
        assert!(message.contains("found 1"), "{message}");
    }

    #[test]
    fn channel_count_mismatch_reports_line() {
        let text = TWO_JOINT.replace("0 0 0 0 0 0 0 0 0", "0 0 0 0 0 0 0 0");
        let error = parse_bvh(&text).unwrap_err();
        let message = error.to_string();
        assert!(message.contains("line 19"), "{message}");
        assert!(message.contains("declares 9 channels"), "{message}");
    }

    #[test]
    fn root_position_channels_are_scaled() {
        let text = TWO_JOINT.replace(
            "0 0 0 0 0 0 0 0 0",
            "10 20 30 0 0 0 0 0 0",
        );
        let (_, clip) = parse_bvh(&text).unwrap();
        assert_abs_diff_eq!(
            clip.frames[0].pose.root_position,
            Vector3::new(0.1, 0.2, 0.3),
            epsilon = 1e-12
        );
    }

    #[test]
    fn attach_robot_ee_copies_hand_track() {
        let (_, mut primary) = parse_bvh(TWO_JOINT).unwrap();
        let (_, robot) = parse_bvh(TWO_JOINT).unwrap();
        attach_robot_ee(&mut primary, &robot, "spine").unwrap();
        assert_abs_diff_eq!(
            primary.frames[0].ee_position,
            Vector3::new(0.0, 1.0, 0.0),
            epsilon = 1e-12
        );
        assert!(attach_robot_ee(&mut primary, &robot, "nope").is_err());
    }
}
