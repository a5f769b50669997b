//! Axis-decoupled constant-velocity Kalman filter for palm tracking.

use super::{ControllerError, KalmanConfig};
use nalgebra::{Matrix2, RowVector2, Vector2, Vector3};

/// One axis: state (position, velocity), discrete white-noise-acceleration
/// process model, position-only measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
struct KalmanAxis {
    x: Vector2<f64>,
    p: Matrix2<f64>,
}

impl KalmanAxis {
    fn min_eigenvalue(&self) -> f64 {
        // Closed form for a symmetric 2x2 matrix.
        let (a, b, c) = (self.p[(0, 0)], self.p[(0, 1)], self.p[(1, 1)]);
        let mid = 0.5 * (a + c);
        mid - (0.25 * (a - c).powi(2) + b * b).sqrt()
    }
}

/// Three independent per-axis filters sharing one clock. Uninitialized until
/// the first measurement arrives; `with_state` seeds an exact state instead.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFilter3 {
    dt: f64,
    q: f64,
    r: f64,
    axes: Option<[KalmanAxis; 3]>,
}

impl KalmanFilter3 {
    pub fn new(config: KalmanConfig, tick_rate: f64) -> Result<Self, ControllerError> {
        if !(tick_rate > 0.0) {
            return Err(ControllerError::Config("tick_rate must be positive".into()));
        }
        if config.process_noise < 0.0 || config.measurement_noise < 0.0 {
            return Err(ControllerError::Config(
                "kalman noise levels must be non-negative".into(),
            ));
        }
        Ok(KalmanFilter3 {
            dt: 1.0 / tick_rate,
            q: config.process_noise,
            r: config.measurement_noise,
            axes: None,
        })
    }

    /// Seed position, velocity and a per-axis covariance of
    /// `diag(pos_var, vel_var)` directly.
    pub fn with_state(
        config: KalmanConfig,
        tick_rate: f64,
        position: Vector3<f64>,
        velocity: Vector3<f64>,
        pos_var: f64,
        vel_var: f64,
    ) -> Result<Self, ControllerError> {
        let mut filter = Self::new(config, tick_rate)?;
        filter.axes = Some(std::array::from_fn(|i| KalmanAxis {
            x: Vector2::new(position[i], velocity[i]),
            p: Matrix2::new(pos_var, 0.0, 0.0, vel_var),
        }));
        Ok(filter)
    }

    pub fn initialized(&self) -> bool {
        self.axes.is_some()
    }

    /// Position and velocity estimates, if initialized.
    pub fn estimate(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        self.axes.as_ref().map(|axes| {
            (
                Vector3::new(axes[0].x[0], axes[1].x[0], axes[2].x[0]),
                Vector3::new(axes[0].x[1], axes[1].x[1], axes[2].x[1]),
            )
        })
    }

    /// Smallest covariance eigenvalue across axes; the filter invariant is
    /// that this never drops below -1e-9.
    pub fn min_covariance_eigenvalue(&self) -> f64 {
        match &self.axes {
            Some(axes) => axes
                .iter()
                .map(KalmanAxis::min_eigenvalue)
                .fold(f64::INFINITY, f64::min),
            None => f64::INFINITY,
        }
    }

    /// Predict-update on one measurement; returns the one-step-ahead
    /// position. The first call initializes the state at the measurement
    /// with zero velocity.
    pub fn step(&mut self, measurement: Vector3<f64>) -> Result<Vector3<f64>, ControllerError> {
        if !measurement.iter().all(|v| v.is_finite()) {
            return Err(ControllerError::NonFiniteMeasurement);
        }
        let dt = self.dt;
        let axes = self.axes.get_or_insert_with(|| {
            std::array::from_fn(|i| KalmanAxis {
                x: Vector2::new(measurement[i], 0.0),
                p: Matrix2::new(1e-4, 0.0, 0.0, 1.0),
            })
        });
        let f = Matrix2::new(1.0, dt, 0.0, 1.0);
        let q = self.q
            * Matrix2::new(
                dt.powi(4) / 4.0,
                dt.powi(3) / 2.0,
                dt.powi(3) / 2.0,
                dt.powi(2),
            );
        let mut prediction = Vector3::zeros();
        for (i, axis) in axes.iter_mut().enumerate() {
            axis.x = f * axis.x;
            axis.p = f * axis.p * f.transpose() + q;

            // Position-only update; a vanishing innovation variance means
            // the state is already exact, so the update is skipped.
            let s = axis.p[(0, 0)] + self.r;
            if s >= 1e-18 {
                let k = Vector2::new(axis.p[(0, 0)], axis.p[(1, 0)]) / s;
                axis.x += k * (measurement[i] - axis.x[0]);
                // Joseph form keeps the covariance symmetric PSD.
                let ikh = Matrix2::identity() - k * RowVector2::new(1.0, 0.0);
                axis.p = ikh * axis.p * ikh.transpose() + self.r * k * k.transpose();
                axis.p = 0.5 * (axis.p + axis.p.transpose());
            }
            prediction[i] = axis.x[0] + axis.x[1] * dt;
        }
        Ok(prediction)
    }
}

/// Predict-update cycle on one measurement; returns the one-step-ahead
/// position estimate.
pub fn kalman_step(
    filter: &mut KalmanFilter3,
    measurement: Vector3<f64>,
) -> Result<Vector3<f64>, ControllerError> {
    filter.step(measurement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::sub_rng;
    use rand::Rng;

    fn default_filter() -> KalmanFilter3 {
        KalmanFilter3::new(KalmanConfig::default(), 25.0).unwrap()
    }

    #[test]
    fn stationary_target_converges_within_fifty_ticks() {
        let mut filter = default_filter();
        let target = Vector3::new(0.3, 0.5, 0.2);
        let mut prediction = Vector3::zeros();
        for _ in 0..50 {
            prediction = filter.step(target).unwrap();
            assert!(filter.min_covariance_eigenvalue() >= -1e-9);
        }
        assert!(
            (prediction - target).norm() < 1e-3,
            "prediction {prediction:?} too far from {target:?}"
        );
    }

    #[test]
    fn constant_velocity_target_is_predicted_one_step_ahead() {
        let mut filter = default_filter();
        let dt = 0.04;
        let v = Vector3::new(0.3, -0.1, 0.2);
        let p0 = Vector3::new(0.1, 0.6, -0.2);
        let at = |t: usize| p0 + v * (t as f64 * dt);
        for t in 0..200 {
            filter.step(at(t)).unwrap();
        }
        for t in 200..220 {
            let prediction = filter.step(at(t)).unwrap();
            let error = (prediction - at(t + 1)).norm();
            assert!(error < 1e-3, "tick {t}: one-step error {error}");
        }
    }

    #[test]
    fn zero_noise_with_perfect_init_is_exact() {
        let config = KalmanConfig {
            process_noise: 0.0,
            measurement_noise: 0.0,
        };
        let v = Vector3::new(0.25, -0.5, 0.1);
        let mut z = Vector3::new(1.0, 2.0, 3.0);
        let mut filter = KalmanFilter3::with_state(config, 25.0, z, v, 0.0, 0.0).unwrap();
        let dt = 0.04;
        for _ in 0..30 {
            // The seeded state lags the next measurement by one tick, so the
            // internal predict step lands exactly on the advanced target.
            z += v * dt;
            let prediction = filter.step(z).unwrap();
            // Same accumulation on both sides, so equality is exact.
            assert_eq!(prediction, z + v * dt);
        }
    }

    #[test]
    fn non_finite_measurement_is_rejected() {
        let mut filter = default_filter();
        filter.step(Vector3::new(0.0, 0.0, 0.0)).unwrap();
        let before = filter.clone();
        assert!(matches!(
            filter.step(Vector3::new(f64::NAN, 0.0, 0.0)),
            Err(ControllerError::NonFiniteMeasurement)
        ));
        assert!(matches!(
            filter.step(Vector3::new(0.0, f64::INFINITY, 0.0)),
            Err(ControllerError::NonFiniteMeasurement)
        ));
        // A rejected measurement leaves the state untouched.
        assert_eq!(filter, before);
    }

    #[test]
    fn covariance_stays_psd_under_noisy_tracking() {
        let mut rng = sub_rng(9, "controller/kalman-psd");
        let mut filter = default_filter();
        let mut target = Vector3::new(0.2, 0.4, 0.1);
        for _ in 0..500 {
            target += Vector3::new(
                rng.gen_range(-0.02..0.02),
                rng.gen_range(-0.02..0.02),
                rng.gen_range(-0.02..0.02),
            );
            filter.step(target).unwrap();
            let min_eig = filter.min_covariance_eigenvalue();
            assert!(min_eig >= -1e-9, "covariance lost PSD: {min_eig}");
        }
    }

    #[test]
    fn estimate_tracks_velocity() {
        let mut filter = default_filter();
        let v = Vector3::new(0.3, 0.0, -0.2);
        let dt = 0.04;
        for t in 0..300 {
            filter.step(Vector3::new(0.0, 0.1, 0.5) + v * (t as f64 * dt)).unwrap();
        }
        let (_, vel) = filter.estimate().unwrap();
        assert!((vel - v).norm() < 1e-2, "velocity estimate {vel:?}");
    }
}
