//! Region-of-transfer prediction: where a handover will take place.
//!
//! The region of transfer (RoT) is the 6-DoF location of an object exchange:
//! the midpoint of the two palms at the transfer instant plus the unit vector
//! pointing from the giver's palm to the receiver's palm. A conditional VAE
//! observes the past second of both participants' motion and predicts the RoT
//! of the enclosing handover segment at every timestamp.
//!
//! Ground truth is derived per segment: the frame with the smallest
//! palm-to-palm distance counts as the transfer instant, and its RoT labels
//! every window of that segment. The primary user's palm is the `right_hand`
//! joint; the robot's palm is the end effector. All geometry lives in the
//! hip-root frame shared with the feature pipeline.
//!
//! Prediction in mean-latent mode decodes the prior mean (z = 0), making
//! inference deterministic; sampling mode draws z from the unit Gaussian
//! prior. The encoder mirrors the trajectory model (embedding, multi-head
//! attention, pooling head) with the 6-DoF target appended to every input row;
//! its embedding width is twice the latent dimension.

mod eval;
mod model;
pub(crate) mod train;

pub use eval::{eval_rot, meae, RotReport, RotReportRow};
pub use model::RotModel;
pub use train::{
    build_examples, segment_rot_targets, train_rot, RotExample, RotTrainingRecord,
};

use crate::dataio::clip::HandoverState;
use crate::dataio::DataError;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Skeleton joint treated as the primary user's giving palm.
pub const PALM_JOINT: &str = "right_hand";

#[derive(Debug, Error)]
pub enum RotError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("palms are coincident (distance {distance:.2e} m); transfer direction undefined")]
    DegeneratePalms { distance: f64 },
    #[error("no giver in state {0:?}; ground truth needs a handover segment")]
    NoGiver(HandoverState),
    #[error("predicted direction has near-zero norm {0:.2e}")]
    ZeroDirection(f64),
    #[error("skeleton has no `{0}` joint to serve as the palm")]
    MissingPalmJoint(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("corpus yields no labeled handover windows")]
    EmptyCorpus,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Where and along which axis an object changes hands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfTransfer {
    /// Midpoint of the two palms, hip-root frame (m).
    pub position: Vector3<f64>,
    /// Unit vector from the giver's palm to the receiver's palm.
    pub direction: Vector3<f64>,
}

impl RegionOfTransfer {
    /// Build from a position and a direction of any positive length; the
    /// direction is stored normalized.
    pub fn new(position: Vector3<f64>, direction: Vector3<f64>) -> Result<Self, RotError> {
        let norm = direction.norm();
        if norm < 1e-9 {
            return Err(RotError::ZeroDirection(norm));
        }
        Ok(RegionOfTransfer {
            position,
            direction: direction / norm,
        })
    }

    /// Flatten to [position, direction] for loss arithmetic.
    pub fn as_vec6(&self) -> [f64; 6] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.direction.x,
            self.direction.y,
            self.direction.z,
        ]
    }
}

/// Ground-truth RoT from the two palm positions at the transfer instant.
/// The giver depends on the segment kind: the robot gives while handing
/// over, the primary user gives while taking back.
pub fn rot_ground_truth(
    primary_palm: Vector3<f64>,
    robot_palm: Vector3<f64>,
    kind: HandoverState,
) -> Result<RegionOfTransfer, RotError> {
    let (giver, receiver) = match kind {
        HandoverState::HandingOver => (robot_palm, primary_palm),
        HandoverState::TakingBack => (primary_palm, robot_palm),
        HandoverState::Idle => return Err(RotError::NoGiver(kind)),
    };
    let distance = (receiver - giver).norm();
    if distance <= 1e-6 {
        return Err(RotError::DegeneratePalms { distance });
    }
    RegionOfTransfer::new((primary_palm + robot_palm) / 2.0, receiver - giver)
}

/// Mean of squared position and direction errors, halved.
pub fn rot_loss(pred: &RegionOfTransfer, gt: &RegionOfTransfer) -> f64 {
    let dp = pred.position - gt.position;
    let dq = pred.direction - gt.direction;
    0.5 * (dp.norm_squared() + dq.norm_squared())
}

/// Hyperparameters of the RoT predictor. Latent and hidden sizes mirror the
/// trajectory model defaults so the two remain comparable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotConfig {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    /// Past-window half-width in frames; the model sees t+1 frames.
    pub t: usize,
    /// Weight of the KL regularizer.
    pub beta: f64,
    pub attention_heads: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub lr_decay_start_epoch: usize,
    pub batch_size: usize,
    /// Step between window centers when building training examples.
    pub window_stride: usize,
    pub seed: u64,
}

impl Default for RotConfig {
    fn default() -> Self {
        RotConfig {
            latent_dim: 32,
            hidden_dim: 256,
            t: 25,
            beta: 0.1,
            attention_heads: 4,
            epochs: 250,
            lr_start: 1e-4,
            lr_end: 1e-7,
            lr_decay_start_epoch: 50,
            batch_size: 64,
            window_stride: 1,
            seed: 7,
        }
    }
}

impl RotConfig {
    pub fn validate(&self) -> Result<(), RotError> {
        let positive = [
            ("latent_dim", self.latent_dim),
            ("hidden_dim", self.hidden_dim),
            ("t", self.t),
            ("attention_heads", self.attention_heads),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("window_stride", self.window_stride),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(RotError::Config(format!("{name} must be positive")));
            }
        }
        if self.beta < 0.0 {
            return Err(RotError::Config("beta must be non-negative".into()));
        }
        if self.lr_start <= 0.0 || self.lr_end <= 0.0 {
            return Err(RotError::Config("learning rates must be positive".into()));
        }
        if self.embed_dim() % self.attention_heads != 0 {
            return Err(RotError::Config(format!(
                "attention_heads {} must divide the embedding width {}",
                self.attention_heads,
                self.embed_dim()
            )));
        }
        Ok(())
    }

    /// Width of the attention embedding, tied to the latent size.
    pub fn embed_dim(&self) -> usize {
        2 * self.latent_dim
    }

    /// Frames visible to the model.
    pub fn seen_len(&self) -> usize {
        self.t + 1
    }
}
