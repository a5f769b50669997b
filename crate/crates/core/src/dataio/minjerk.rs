//! Minimum-jerk point-to-point trajectories, used to script the synthetic
//! robot reach motion.

use crate::dataio::DataError;
use nalgebra::Vector3;

/// Position on the minimum-jerk polynomial at normalized time `tau` in [0,1]:
/// x(tau) = start + (end - start)(10 tau^3 - 15 tau^4 + 6 tau^5).
pub fn min_jerk_position(start: &Vector3<f64>, end: &Vector3<f64>, tau: f64) -> Vector3<f64> {
    let t = tau.clamp(0.0, 1.0);
    let s = 10.0 * t.powi(3) - 15.0 * t.powi(4) + 6.0 * t.powi(5);
    start + (end - start) * s
}

/// Sampled minimum-jerk trajectory from `start` to `end` over `duration`
/// seconds at `fps`. The duration is quantized to whole frames (at least one
/// step) so the final sample lands exactly on `end`; the result holds
/// `steps + 1` points including both endpoints.
pub fn minimum_jerk(
    start: &Vector3<f64>,
    end: &Vector3<f64>,
    duration: f64,
    fps: f64,
) -> Result<Vec<Vector3<f64>>, DataError> {
    if duration <= 0.0 {
        return Err(DataError::Config(format!(
            "minimum-jerk duration must be positive, got {duration}"
        )));
    }
    if fps <= 0.0 {
        return Err(DataError::Config(format!(
            "minimum-jerk fps must be positive, got {fps}"
        )));
    }
    let steps = ((duration * fps).round() as usize).max(1);
    Ok((0..=steps)
        .map(|i| min_jerk_position(start, end, i as f64 / steps as f64))
        .collect())
}
