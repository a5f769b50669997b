//! Kinematic tree definition: joints, parent links, offsets and per-axis
//! rotation limits.

use super::KinematicsError;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// One rotational degree of freedom of a joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DofAxis {
    X,
    Y,
    Z,
}

/// One joint of the kinematic tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    /// Parent joint index; `None` marks the root. Parents always precede
    /// their children in the joint list.
    pub parent: Option<usize>,
    /// Offset from the parent joint, in the parent's frame (meters).
    pub offset: Vector3<f64>,
    /// Permitted rotation axes with `(min, max)` angle limits in radians,
    /// applied in listed (intrinsic) order.
    pub dof_axes: Vec<(DofAxis, f64, f64)>,
}

/// A topologically sorted kinematic tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Skeleton {
    joints: Vec<JointSpec>,
}

impl Skeleton {
    /// Validate and build a skeleton. The joint list must contain exactly one
    /// root, every parent index must precede its child, and all DoF limits
    /// must satisfy `min ≤ max`.
    pub fn new(joints: Vec<JointSpec>) -> Result<Self, KinematicsError> {
        let mut roots = 0;
        for (i, joint) in joints.iter().enumerate() {
            match joint.parent {
                None => roots += 1,
                Some(p) if p >= i => {
                    return Err(KinematicsError::InvalidSkeleton(format!(
                        "joint {} ({}) has parent index {} >= its own index",
                        i, joint.name, p
                    )))
                }
                Some(_) => {}
            }
            for &(axis, min, max) in &joint.dof_axes {
                if min > max {
                    return Err(KinematicsError::InvalidSkeleton(format!(
                        "joint {} axis {:?}: limit min {} > max {}",
                        joint.name, axis, min, max
                    )));
                }
            }
        }
        if roots != 1 {
            return Err(KinematicsError::InvalidSkeleton(format!(
                "expected exactly one root joint, found {roots}"
            )));
        }
        Ok(Self { joints })
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// Total rotational DoF across all joints.
    pub fn dof_count(&self) -> usize {
        self.joints.iter().map(|j| j.dof_axes.len()).sum()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }
}

/// The reduced 17-joint body used for synthetic data: hips, two spine links,
/// chest, neck, head, face, and clavicle/shoulder/elbow/wrist/hand chains for
/// both arms. Offsets are in the joint-local convention (+Z forward, +Y up,
/// +X toward the character's left).
pub fn synthetic_skeleton() -> Skeleton {
    use std::f64::consts::PI;
    let full = vec![(DofAxis::Z, -PI, PI), (DofAxis::X, -PI, PI), (DofAxis::Y, -PI, PI)];
    let j = |name: &str, parent: Option<usize>, offset: [f64; 3]| JointSpec {
        name: name.to_string(),
        parent,
        offset: Vector3::new(offset[0], offset[1], offset[2]),
        dof_axes: full.clone(),
    };
    Skeleton::new(vec![
        j("hips", None, [0.0, 0.0, 0.0]),             // 0
        j("spine", Some(0), [0.0, 0.10, 0.0]),        // 1
        j("spine1", Some(1), [0.0, 0.10, 0.0]),       // 2
        j("chest", Some(2), [0.0, 0.15, 0.0]),        // 3
        j("neck", Some(3), [0.0, 0.15, 0.0]),         // 4
        j("head", Some(4), [0.0, 0.12, 0.0]),         // 5
        j("face", Some(5), [0.0, 0.05, 0.10]),        // 6
        j("left_clavicle", Some(3), [0.08, 0.12, 0.0]), // 7
        j("left_shoulder", Some(7), [0.12, 0.0, 0.0]), // 8
        j("left_elbow", Some(8), [0.28, 0.0, 0.0]),   // 9
        j("left_wrist", Some(9), [0.25, 0.0, 0.0]),   // 10
        j("left_hand", Some(10), [0.09, 0.0, 0.0]),   // 11
        j("right_clavicle", Some(3), [-0.08, 0.12, 0.0]), // 12
        j("right_shoulder", Some(12), [-0.12, 0.0, 0.0]), // 13
        j("right_elbow", Some(13), [-0.28, 0.0, 0.0]), // 14
        j("right_wrist", Some(14), [-0.25, 0.0, 0.0]), // 15
        j("right_hand", Some(15), [-0.09, 0.0, 0.0]), // 16
    ])
    .expect("synthetic skeleton is well formed")
}
