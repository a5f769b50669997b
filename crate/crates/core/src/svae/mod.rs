//! Variational trajectory generator for the robot end-effector.
//!
//! The model has three parts. A full-window encoder compresses a window of
//! past and future motion (2T+1 frames of primary-user and robot features)
//! into a Gaussian latent. A latent controller encodes only the seen half
//! (T+1 frames) plus a one-hot handover state and is trained to land in the
//! same latent region, so it can stand in for the full encoder at inference
//! time when no future exists. A mixture-of-experts decoder maps a latent
//! sample plus the current frame's features to the next end-effector
//! position. Training runs in two stages: the full encoder and decoder
//! first, then the latent controller against the frozen encoder.
//!
//! Per-frame embeddings are pooled with temporal multi-head self-attention;
//! the embedding width is twice the latent dimension.

pub mod eval;
pub mod loss;
pub mod model;
pub mod rollout;
pub mod schedule;
pub mod train;

pub use eval::{eval_svae, SvaeReport, SvaeReportRow};
pub use loss::{elbo_loss, gaussian_kl_between, gaussian_kl_standard, mae};
pub use model::{LatentDistribution, SvaeModel, TrainingStage};
pub use rollout::{generate_next, rollout, rollout_traced, sample_next, RolloutTrace};
pub use schedule::{lr_schedule, sched_sampling_p, LrSchedule};
pub use train::{train_stage1, train_stage2, TrainingRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvaeError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at stage {stage} epoch {epoch} batch {batch}")]
    NonFiniteLoss {
        stage: u8,
        epoch: usize,
        batch: usize,
    },
    #[error("corpus has no usable training windows")]
    EmptyCorpus,
    #[error("stream too short: rollout of {steps} steps needs {needed} frames, got {got}")]
    StreamTooShort {
        steps: usize,
        needed: usize,
        got: usize,
    },
    #[error(transparent)]
    Data(#[from] crate::dataio::DataError),
}

/// Hyper-parameters for the generator. Defaults are the full-scale
/// training recipe; tests and the desk-scale acceptance run shrink them.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SvaeConfig {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub num_experts: usize,
    pub t: usize,
    pub beta: f64,
    pub attention_heads: usize,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    /// Epochs at the start of stage 2 that optimize only the latent
    /// alignment KL before the reconstruction term is added.
    pub stage2_kl_only_epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub lr_decay_start_epoch: usize,
    pub rollout_len: usize,
    pub sched_sampling_ramp_epochs: usize,
    pub recon_only_epochs: usize,
    /// Training chunks drawn per epoch; 0 uses every chunk.
    pub chunks_per_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SvaeConfig {
    fn default() -> Self {
        SvaeConfig {
            latent_dim: 32,
            hidden_dim: 256,
            num_experts: 6,
            t: 25,
            beta: 0.1,
            attention_heads: 4,
            stage1_epochs: 140,
            stage2_epochs: 100,
            stage2_kl_only_epochs: 50,
            lr_start: 1e-4,
            lr_end: 1e-7,
            lr_decay_start_epoch: 50,
            rollout_len: 10,
            sched_sampling_ramp_epochs: 50,
            recon_only_epochs: 10,
            chunks_per_epoch: 0,
            batch_size: 64,
            seed: 7,
        }
    }
}

impl SvaeConfig {
    pub fn validate(&self) -> Result<(), SvaeError> {
        let positive = [
            ("latent_dim", self.latent_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_experts", self.num_experts),
            ("t", self.t),
            ("attention_heads", self.attention_heads),
            ("stage1_epochs", self.stage1_epochs),
            ("stage2_epochs", self.stage2_epochs),
            ("rollout_len", self.rollout_len),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SvaeError::Config(format!("{name} must be positive")));
            }
        }
        if self.beta < 0.0 {
            return Err(SvaeError::Config("beta must be non-negative".into()));
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return Err(SvaeError::Config("learning rates must be positive".into()));
        }
        if self.embed_dim() % self.attention_heads != 0 {
            return Err(SvaeError::Config(format!(
                "attention_heads ({}) must divide the embedding width ({})",
                self.attention_heads,
                self.embed_dim()
            )));
        }
        Ok(())
    }

    /// Width of the per-frame embedding fed to attention.
    pub fn embed_dim(&self) -> usize {
        2 * self.latent_dim
    }

    /// Frames in a seen window.
    pub fn seen_len(&self) -> usize {
        self.t + 1
    }

    /// Frames in a full window.
    pub fn full_len(&self) -> usize {
        2 * self.t + 1
    }
}
