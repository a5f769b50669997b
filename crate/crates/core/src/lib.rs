//! Motion models and simulation toolkit for hip-mounted supernumerary-limb
//! (SRL) handovers.
//!
//! The crate is organised around the stages of the handover pipeline:
//!
//! - [`kinematics`] — skeleton model, forward kinematics, 6D rotation
//!   representation and pose normalization.
//! - [`dataio`] — BVH/CSV ingestion, handover segmentation, model windows,
//!   participant splits and the synthetic minimum-jerk corpus.
//! - [`nn`] — the small reverse-mode autodiff engine the models run on.
//! - [`svae`] — autoregressive trajectory generator (variational
//!   encoder/latent-controller/mixture-of-experts decoder).
//! - [`rot`] — region-of-transfer predictor (6 DoF handover endpoint).
//! - [`timing`] — handover-timeframe binary classifier.
//! - [`analysis`] — gradient-based joint importance and corpus statistics.
//! - [`controller`] — closed-loop controllers (data-driven and Kalman
//!   baseline) plus the episode simulator.
//!
//! # Coordinate conventions
//!
//! World frame is right-handed and Y-up. A normalized clip places the primary
//! user's hip at the origin, facing +X, with the right-hand side at +Z. The
//! hip joint's local +Z axis is its forward direction; heading normalization
//! projects that axis onto the horizontal plane and rotates it to +X.

pub mod analysis;
pub mod checkpoint;
pub mod controller;
pub mod dataio;
pub mod kinematics;
pub mod nn;
pub mod rot;
pub mod seeds;
pub mod svae;
pub mod timing;

pub use dataio::clip::{HandoverState, MotionClip};
pub use kinematics::{Pose, Rotation6D, Skeleton};
