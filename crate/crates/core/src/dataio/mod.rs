//! Motion data ingest and generation.
//!
//! Covers BVH and CSV parsing, per-frame handover annotations, segmentation,
//! model window construction, participant-level train/test splits, and a
//! deterministic synthetic corpus built from scripted activity motion plus
//! minimum-jerk robot reaches. The synthetic corpus is the default fixture;
//! recorded data drops into the same types through the parsers.

pub mod annotations;
pub mod bvh;
pub mod clip;
pub mod csvio;
pub mod features;
pub mod minjerk;
pub mod split;
pub mod synth;
pub mod window;

pub use annotations::{load_annotations, segment_handovers, HandoverSegment};
pub use bvh::parse_bvh;
pub use clip::{Activity, Frame, FrameAnnotation, HandoverState, MotionClip, Possession};
pub use csvio::{
    load_corpus, read_clip_csv, save_corpus, write_annotations_csv, write_clip_csv, ManifestEntry,
};
pub use features::{frame_features, FeatureLayout};
pub use minjerk::minimum_jerk;
pub use split::{participant_split, Corpus};
pub use synth::{synth_corpus, SynthConfig};
pub use window::{make_windows, make_windows_strided, MotionWindow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bvh parse error at line {line}: {message}")]
    Bvh { line: usize, message: String },
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("inconsistent handover segment at frames {start}..={end}: {detail}")]
    SegmentConsistency {
        start: usize,
        end: usize,
        detail: String,
    },
    #[error("clip '{name}' too short for windows: {frames} frames, need at least {needed}")]
    ClipTooShort {
        name: String,
        frames: usize,
        needed: usize,
    },
    #[error("unknown participant pair id {0}")]
    UnknownPair(u32),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("csv schema error: {0}")]
    CsvSchema(String),
    #[error(transparent)]
    Kinematics(#[from] crate::kinematics::KinematicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
