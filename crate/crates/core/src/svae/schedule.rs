//! Training schedules: the scheduled-sampling ramp and the decaying
//! learning rate shared by every trainer in this crate.

use serde::{Deserialize, Serialize};

/// Probability of feeding the model its own prediction instead of ground
/// truth at a given epoch: a linear ramp from 0 to 1 over `ramp_epochs`.
pub fn sched_sampling_p(epoch: usize, ramp_epochs: usize) -> f64 {
    if ramp_epochs == 0 {
        return 1.0;
    }
    (epoch as f64 / ramp_epochs as f64).min(1.0)
}

/// Learning rate that stays at `lr_start` until `decay_start_epoch`, then
/// decays geometrically so the final epoch lands exactly on `lr_end`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_start: f64,
    pub lr_end: f64,
    pub decay_start_epoch: usize,
    pub total_epochs: usize,
}

/// Evaluate the schedule at an epoch (0-based).
pub fn lr_schedule(epoch: usize, cfg: &LrSchedule) -> f64 {
    if epoch < cfg.decay_start_epoch || cfg.total_epochs <= cfg.decay_start_epoch {
        return cfg.lr_start;
    }
    let span = (cfg.total_epochs - cfg.decay_start_epoch) as f64;
    let frac = (epoch - cfg.decay_start_epoch + 1) as f64 / span;
    cfg.lr_start * (cfg.lr_end / cfg.lr_start).powf(frac.min(1.0))
}

impl LrSchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        lr_schedule(epoch, self)
    }
}
