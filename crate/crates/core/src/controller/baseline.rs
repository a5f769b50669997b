//! Kalman + activation-region baseline controller.

use super::{ControllerConfig, ControllerError, KalmanFilter3, SPEED_CAP};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineStatus {
    /// Waiting for the palm to enter an activation region.
    Inactive,
    /// Moving toward the predicted palm position.
    Tracking,
    /// Within the stop distance; absorbing.
    Stopped,
}

impl BaselineStatus {
    pub fn label(self) -> &'static str {
        match self {
            BaselineStatus::Inactive => "inactive",
            BaselineStatus::Tracking => "tracking",
            BaselineStatus::Stopped => "stopped",
        }
    }
}

/// Tracks the palm with a constant-velocity filter the whole time, but only
/// moves once the palm has entered an activation region. Activation latches;
/// stopping is absorbing.
#[derive(Debug, Clone)]
pub struct BaselineController {
    config: ControllerConfig,
    filter: KalmanFilter3,
    status: BaselineStatus,
}

impl BaselineController {
    pub fn new(config: ControllerConfig) -> Result<Self, ControllerError> {
        config.validate()?;
        if config.activation_regions.is_empty() {
            return Err(ControllerError::Config(
                "baseline controller needs at least one activation region".into(),
            ));
        }
        let filter = KalmanFilter3::new(config.kalman, config.tick_rate)?;
        Ok(BaselineController {
            config,
            filter,
            status: BaselineStatus::Inactive,
        })
    }

    pub fn status(&self) -> BaselineStatus {
        self.status
    }

    pub fn filter(&self) -> &KalmanFilter3 {
        &self.filter
    }

    /// One tick: filter the palm measurement, and when active move the
    /// end-effector toward the predicted palm at the capped speed, halting
    /// at the stop distance.
    pub fn step(
        &mut self,
        user_hand: Vector3<f64>,
        ee: Vector3<f64>,
    ) -> Result<(Vector3<f64>, BaselineStatus), ControllerError> {
        let predicted = self.filter.step(user_hand)?;
        match self.status {
            BaselineStatus::Stopped => return Ok((ee, self.status)),
            BaselineStatus::Inactive => {
                let entered = self
                    .config
                    .activation_regions
                    .iter()
                    .any(|b| b.contains(user_hand));
                if !entered {
                    return Ok((ee, self.status));
                }
                self.status = BaselineStatus::Tracking;
            }
            BaselineStatus::Tracking => {}
        }

        if (ee - user_hand).norm() <= self.config.stop_distance {
            self.status = BaselineStatus::Stopped;
            return Ok((ee, self.status));
        }
        let toward = predicted - ee;
        let distance = toward.norm();
        let max_step = SPEED_CAP * self.config.dt();
        // Never step past the stop ring around the palm, so the halt distance
        // does not depend on how the tick grid aligns with the approach.
        let to_ring = (ee - user_hand).norm() - self.config.stop_distance;
        let step = max_step.min(distance).min(to_ring);
        let next = if distance <= 1e-12 {
            ee
        } else {
            ee + toward * (step / distance)
        };
        if (next - user_hand).norm() <= self.config.stop_distance + 1e-9 {
            self.status = BaselineStatus::Stopped;
        }
        Ok((next, self.status))
    }
}

/// One baseline tick; see [`BaselineController::step`].
pub fn baseline_step(
    controller: &mut BaselineController,
    user_hand: Vector3<f64>,
    ee: Vector3<f64>,
) -> Result<(Vector3<f64>, BaselineStatus), ControllerError> {
    controller.step(user_hand, ee)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ActivationBox;

    fn controller() -> BaselineController {
        BaselineController::new(ControllerConfig::default()).unwrap()
    }

    #[test]
    fn hand_outside_regions_never_moves_the_ee() {
        let mut c = controller();
        let ee0 = Vector3::new(0.0, 0.0, 0.25);
        let mut ee = ee0;
        for _ in 0..50 {
            let (next, status) = c.step(Vector3::new(2.0, 2.0, 2.0), ee).unwrap();
            assert_eq!(status, BaselineStatus::Inactive);
            ee = next;
        }
        assert_eq!(ee, ee0);
    }

    #[test]
    fn static_hand_inside_region_is_approached_and_stopped_at_threshold() {
        let mut c = controller();
        let hand = Vector3::new(0.3, 0.5, 0.2);
        let dir = Vector3::new(1.0, 1.0, 1.0).normalize();
        let mut ee = hand + dir; // exactly one meter away
        let max_step = SPEED_CAP / 25.0 + 1e-12;
        let mut last_distance = (ee - hand).norm();
        for _ in 0..300 {
            let (next, _) = c.step(hand, ee).unwrap();
            assert!((next - ee).norm() <= max_step, "speed cap violated");
            let d = (next - hand).norm();
            assert!(d <= last_distance + 1e-12, "approach not monotone");
            last_distance = d;
            ee = next;
            if c.status() == BaselineStatus::Stopped {
                break;
            }
        }
        assert_eq!(c.status(), BaselineStatus::Stopped);
        let final_distance = (ee - hand).norm();
        assert!(
            (final_distance - 0.12).abs() <= 0.005,
            "stopped at {final_distance}"
        );
    }

    #[test]
    fn stop_state_is_absorbing_for_a_static_hand() {
        let mut c = controller();
        let hand = Vector3::new(0.3, 0.5, 0.2);
        let mut ee = hand + Vector3::new(0.3, 0.0, 0.0);
        for _ in 0..300 {
            let (next, _) = c.step(hand, ee).unwrap();
            ee = next;
            if c.status() == BaselineStatus::Stopped {
                break;
            }
        }
        assert_eq!(c.status(), BaselineStatus::Stopped);
        let parked = ee;
        for _ in 0..50 {
            let (next, status) = c.step(hand, ee).unwrap();
            assert_eq!(status, BaselineStatus::Stopped);
            assert_eq!(next, parked);
            ee = next;
        }
    }

    #[test]
    fn activation_latches_after_the_hand_leaves_the_region() {
        let mut c = controller();
        let inside = Vector3::new(0.3, 0.4, 0.2);
        let outside = Vector3::new(2.0, 2.0, 2.0);
        let mut ee = Vector3::new(0.0, 0.0, 0.25);
        let (next, status) = c.step(inside, ee).unwrap();
        assert_eq!(status, BaselineStatus::Tracking);
        ee = next;
        let (next, status) = c.step(outside, ee).unwrap();
        assert_eq!(status, BaselineStatus::Tracking);
        assert_ne!(next, ee, "tracking controller should keep moving");
    }

    #[test]
    fn empty_region_list_is_rejected() {
        let config = ControllerConfig {
            activation_regions: Vec::new(),
            ..Default::default()
        };
        assert!(matches!(
            BaselineController::new(config),
            Err(ControllerError::Config(_))
        ));
    }

    #[test]
    fn already_close_hand_stops_without_moving() {
        let mut c = BaselineController::new(ControllerConfig {
            activation_regions: vec![ActivationBox {
                min: [-1.0, -1.0, -1.0],
                max: [1.0, 1.0, 1.0],
            }],
            ..Default::default()
        })
        .unwrap();
        let hand = Vector3::new(0.1, 0.1, 0.1);
        let ee = hand + Vector3::new(0.05, 0.0, 0.0);
        let (next, status) = c.step(hand, ee).unwrap();
        assert_eq!(status, BaselineStatus::Stopped);
        assert_eq!(next, ee);
    }
}
