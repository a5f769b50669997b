//! Model introspection and corpus statistics: which joints drive each
//! prediction, and where handovers happen.
//!
//! Joint importance is a gradient-based sensitivity analysis: for every
//! evaluation window the model's scalar-reduced output (sum over its output
//! dimensions) is differentiated with respect to the primary-user input
//! features, and absolute gradients are averaged per joint, separately over
//! position and rotation coordinates. Models are probed exactly as deployed:
//! the trajectory generator through its latent-controller mean and decoder,
//! the region-of-transfer predictor through its prior-mean decode (which
//! conditions on the current frame), and the timing classifier through its
//! likelihood output.
//!
//! Corpus statistics mirror the dataset descriptives: handover durations
//! (population std) and point clouds of transfer locations and palm
//! positions, all in the hip frame.

mod importance;
mod stats;

pub use importance::{
    joint_importance, ImportanceChannel, ImportanceModel, JointImportanceRow,
    JointImportanceTable,
};
pub use stats::{handover_stats, points_csv, scatter_svg, HandoverStats, LabeledPoint, ScatterView};

use crate::dataio::DataError;
use crate::rot::RotError;
use crate::svae::SvaeError;
use crate::timing::TimingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("evaluation dataset is empty")]
    EmptyDataset,
    #[error("skeleton has {skeleton} joints but the feature layout expects {layout}")]
    SkeletonMismatch { skeleton: usize, layout: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Svae(#[from] SvaeError),
    #[error(transparent)]
    Rot(#[from] RotError),
    #[error(transparent)]
    Timing(#[from] TimingError),
}
