//! Skeleton model, forward kinematics, rotation representations and pose
//! normalization — the geometric substrate the models consume.

mod normalize;
mod pose;
mod rotation;
mod skeleton;

pub use normalize::{heading_yaw, normalize_clip, normalizing_transform};
pub use pose::{forward_kinematics, forward_kinematics_full, GlobalTransforms, Pose};
pub use rotation::{
    euler_zxy_from_matrix, matrix_from_axis_angles, matrix_to_6d, rot_x, rot_y, rot_z,
    sixd_to_matrix, Rotation6D,
};
pub use skeleton::{synthetic_skeleton, DofAxis, JointSpec, Skeleton};

use thiserror::Error;

/// Errors raised by the kinematic layer.
#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("pose has {pose_joints} joint rotations but skeleton has {skeleton_joints} joints")]
    JointCountMismatch {
        pose_joints: usize,
        skeleton_joints: usize,
    },
    #[error("joint {joint}: {angles} angles supplied for {axes} DoF axes")]
    DofCountMismatch {
        joint: String,
        angles: usize,
        axes: usize,
    },
    #[error("matrix is not a rotation (orthonormality residual {residual:.3e} > {tolerance:.1e})")]
    NotARotation { residual: f64, tolerance: f64 },
    #[error("degenerate 6D rotation input: {0}")]
    Degenerate6d(String),
    #[error("skeleton invalid: {0}")]
    InvalidSkeleton(String),
    #[error("degenerate facing direction in first frame (forward axis vertical)")]
    DegenerateFacing,
    #[error("cannot normalize an empty clip")]
    EmptyClip,
}
