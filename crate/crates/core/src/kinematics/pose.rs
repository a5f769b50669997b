//! Per-frame pose and forward kinematics.

use super::{matrix_from_axis_angles, KinematicsError, Skeleton};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// One frame of a character: world root transform plus per-joint local Euler
/// angles on each joint's permitted axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pose {
    /// Root joint position in the world frame (meters).
    pub root_position: Vector3<f64>,
    /// Root joint rotation (world frame), orthonormal with det +1.
    pub root_rotation: Matrix3<f64>,
    /// Per-joint angles, one `Vec` per skeleton joint, ordered like the
    /// joint's `dof_axes`. The root entry is ignored by FK (its rotation is
    /// `root_rotation`) but kept so indices line up.
    pub joint_angles: Vec<Vec<f64>>,
}

impl Pose {
    /// Rest pose: root at `position` with `rotation`, all joint angles zero.
    pub fn rest(skeleton: &Skeleton, position: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Self {
            root_position: position,
            root_rotation: rotation,
            joint_angles: skeleton
                .joints()
                .iter()
                .map(|j| vec![0.0; j.dof_axes.len()])
                .collect(),
        }
    }

    /// Local rotation matrix of joint `index` (root returns `root_rotation`).
    pub fn local_rotation(&self, skeleton: &Skeleton, index: usize) -> Matrix3<f64> {
        let joint = &skeleton.joints()[index];
        if joint.parent.is_none() {
            return self.root_rotation;
        }
        let axes: Vec<_> = joint.dof_axes.iter().map(|&(a, _, _)| a).collect();
        matrix_from_axis_angles(&axes, &self.joint_angles[index])
    }

    /// Clamp every joint angle into its DoF limits, returning how many were
    /// clamped. Used on ingest, where mocap noise may step outside limits.
    pub fn clamp_to_limits(&mut self, skeleton: &Skeleton) -> usize {
        let mut clamped = 0;
        for (angles, joint) in self.joint_angles.iter_mut().zip(skeleton.joints()) {
            for (angle, &(_, min, max)) in angles.iter_mut().zip(&joint.dof_axes) {
                let v = angle.clamp(min, max);
                if v != *angle {
                    *angle = v;
                    clamped += 1;
                }
            }
        }
        clamped
    }

    fn check_shape(&self, skeleton: &Skeleton) -> Result<(), KinematicsError> {
        if self.joint_angles.len() != skeleton.joint_count() {
            return Err(KinematicsError::JointCountMismatch {
                pose_joints: self.joint_angles.len(),
                skeleton_joints: skeleton.joint_count(),
            });
        }
        for (i, (angles, joint)) in self.joint_angles.iter().zip(skeleton.joints()).enumerate() {
            if joint.parent.is_some() && angles.len() != joint.dof_axes.len() {
                return Err(KinematicsError::DofCountMismatch {
                    joint: skeleton.joints()[i].name.clone(),
                    angles: angles.len(),
                    axes: joint.dof_axes.len(),
                });
            }
        }
        Ok(())
    }
}

/// Global joint transforms: rotation and position per joint.
pub struct GlobalTransforms {
    pub rotations: Vec<Matrix3<f64>>,
    pub positions: Vec<Vector3<f64>>,
}

/// Forward kinematics, root-down:
/// `position(j) = position(parent) + R_global(parent) · offset(j)` and
/// `R_global(j) = R_global(parent) · R_local(j)`.
pub fn forward_kinematics(
    skeleton: &Skeleton,
    pose: &Pose,
) -> Result<Vec<Vector3<f64>>, KinematicsError> {
    Ok(forward_kinematics_full(skeleton, pose)?.positions)
}

/// Forward kinematics keeping the global rotations as well.
pub fn forward_kinematics_full(
    skeleton: &Skeleton,
    pose: &Pose,
) -> Result<GlobalTransforms, KinematicsError> {
    pose.check_shape(skeleton)?;
    let n = skeleton.joint_count();
    let mut rotations = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    for (i, joint) in skeleton.joints().iter().enumerate() {
        match joint.parent {
            None => {
                rotations.push(pose.root_rotation);
                positions.push(pose.root_position);
            }
            Some(p) => {
                let rot = rotations[p] * pose.local_rotation(skeleton, i);
                positions.push(positions[p] + rotations[p] * joint.offset);
                rotations.push(rot);
            }
        }
    }
    Ok(GlobalTransforms {
        rotations,
        positions,
    })
}
