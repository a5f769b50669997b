//! Closed-loop handover controllers and a discrete-time simulator.
//!
//! Two controllers move a hip-mounted end-effector toward the user's palm:
//! a data-driven one (the timing classifier gates autoregressive trajectory
//! generation) and a baseline (axis-decoupled constant-velocity Kalman
//! filter plus activation regions). Both run against scripted user agents
//! that replay annotated clips, tick-stepped at the dataset rate, and halt
//! once the end-effector is within the stop distance of the palm.
//!
//! Everything is expressed in the hip frame (x front, y up, z right), the
//! same coordinates the feature pipeline produces.

mod agent;
mod baseline;
mod episode;
mod hands;
mod kalman;

pub use agent::ScriptedAgent;
pub use baseline::{baseline_step, BaselineController, BaselineStatus};
pub use episode::{
    run_episode, Controller, ControllerTick, EpisodeLog, EpisodeOutcome, TickRecord,
};
pub use hands::{hands_step, HandsController, HandsStatus};
pub use kalman::{kalman_step, KalmanFilter3};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Baseline end-effector speed cap in m/s. The hardware this stands in for
/// is not modeled, so the cap is a fixed documented constant; the per-tick
/// displacement never exceeds `SPEED_CAP / tick_rate`.
pub const SPEED_CAP: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("measurement contains non-finite coordinates")]
    NonFiniteMeasurement,
    #[error("insufficient history: {got} frames buffered, {needed} needed")]
    InsufficientHistory { got: usize, needed: usize },
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error(transparent)]
    Svae(#[from] crate::svae::SvaeError),
    #[error(transparent)]
    Timing(#[from] crate::timing::TimingError),
    #[error(transparent)]
    Data(#[from] crate::dataio::DataError),
}

/// Noise levels of the constant-velocity filter: `process_noise` is the
/// white-acceleration spectral density, `measurement_noise` the position
/// variance per axis. Zero is allowed (degenerate but well-defined).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanConfig {
    pub process_noise: f64,
    pub measurement_noise: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            process_noise: 1.0,
            measurement_noise: 1e-4,
        }
    }
}

/// Axis-aligned box in the hip frame, inclusive on all faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl ActivationBox {
    pub fn contains(&self, p: Vector3<f64>) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    fn validate(&self) -> Result<(), ControllerError> {
        if (0..3).any(|i| self.min[i] > self.max[i]) {
            return Err(ControllerError::Config(format!(
                "activation box min {:?} exceeds max {:?}",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// One box spanning the transfer envelope in front of the user: up to 0.5 m
/// forward, 0.45 m to the right, hip height to 0.8 m above it.
pub fn default_activation_region() -> ActivationBox {
    ActivationBox {
        min: [0.0, 0.0, 0.0],
        max: [
            crate::dataio::synth::ROT_FRONT_MAX,
            crate::dataio::synth::ROT_UP_MAX,
            crate::dataio::synth::ROT_RIGHT_MAX,
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Both controllers halt once the end-effector is within this distance
    /// of the palm (meters).
    pub stop_distance: f64,
    /// Simulation rate in Hz, matching the dataset framerate.
    pub tick_rate: f64,
    /// Trigger volumes for the baseline controller.
    pub activation_regions: Vec<ActivationBox>,
    pub kalman: KalmanConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            stop_distance: 0.12,
            tick_rate: 25.0,
            activation_regions: vec![default_activation_region()],
            kalman: KalmanConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.stop_distance > 0.0) {
            return Err(ControllerError::Config(
                "stop_distance must be positive".into(),
            ));
        }
        if !(self.tick_rate > 0.0) {
            return Err(ControllerError::Config("tick_rate must be positive".into()));
        }
        if self.kalman.process_noise < 0.0 || self.kalman.measurement_noise < 0.0 {
            return Err(ControllerError::Config(
                "kalman noise levels must be non-negative".into(),
            ));
        }
        for b in &self.activation_regions {
            b.validate()?;
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate
    }
}
