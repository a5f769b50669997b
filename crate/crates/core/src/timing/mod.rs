//! Handover-timeframe classification: when to initiate a handover.
//!
//! A small fully-connected network observes the past second of the primary
//! user's motion alone (the robot contributes nothing) and outputs the
//! likelihood that a handover is in progress. Likelihoods strictly above 0.6
//! count as "handover". Windows are labeled by their center frame's
//! annotation, and the evaluation report scores maximal same-label segments:
//! a segment is correct when more than half of its windows classify
//! correctly.

mod eval;
mod model;
mod train;

pub use eval::{accuracy_report, TimingReport, TimingReportRow};
pub use model::TimingModel;
pub use train::{train_timing, TimingTrainingRecord};

use crate::dataio::DataError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Decision threshold: strictly greater counts as a handover.
pub const HANDOVER_THRESHOLD: f64 = 0.6;

/// Clamp applied to predictions inside the cross-entropy.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum TimingError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("likelihood {0} outside [0, 1]")]
    LikelihoodRange(f64),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("corpus yields no training windows")]
    EmptyCorpus,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Hyperparameters of the classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    /// Units per fully-connected layer.
    pub hidden_dim: usize,
    /// Past-window half-width in frames; the model sees t+1 frames.
    pub t: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub lr_decay_start_epoch: usize,
    pub batch_size: usize,
    /// Step between window centers when building training examples.
    pub window_stride: usize,
    /// Weight positive windows by the negative/positive count ratio.
    pub balance_classes: bool,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            hidden_dim: 128,
            t: 25,
            epochs: 500,
            lr_start: 1e-4,
            lr_end: 1e-7,
            lr_decay_start_epoch: 50,
            batch_size: 64,
            window_stride: 1,
            balance_classes: false,
            seed: 7,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), TimingError> {
        let positive = [
            ("hidden_dim", self.hidden_dim),
            ("t", self.t),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("window_stride", self.window_stride),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TimingError::Config(format!("{name} must be positive")));
            }
        }
        if self.lr_start <= 0.0 || self.lr_end <= 0.0 {
            return Err(TimingError::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    /// Frames visible to the model.
    pub fn seen_len(&self) -> usize {
        self.t + 1
    }
}

/// Threshold rule: strictly greater than 0.6 counts as a handover.
pub fn classify(likelihood: f64) -> Result<bool, TimingError> {
    if !(0.0..=1.0).contains(&likelihood) {
        return Err(TimingError::LikelihoodRange(likelihood));
    }
    Ok(likelihood > HANDOVER_THRESHOLD)
}

/// Mean binary cross-entropy with predictions clamped to [eps, 1-eps].
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(
        predictions.len(),
        labels.len(),
        "predictions and labels must pair up"
    );
    assert!(!predictions.is_empty(), "need at least one prediction");
    let n = predictions.len() as f64;
    -predictions
        .iter()
        .zip(labels.iter())
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum::<f64>()
        / n
}
